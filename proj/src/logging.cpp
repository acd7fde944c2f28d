// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "salientgrads/logging.hpp"

#include <cstdlib>
#include <string_view>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {

void configure_logging() {
  auto level = spdlog::level::info;
  if (const char* env = std::getenv("SG_LOG"); env && *env) {
    const std::string_view v(env);
    if (v == "error") {
      level = spdlog::level::err;
    } else if (v == "info") {
      level = spdlog::level::info;
    } else if (v == "debug") {
      level = spdlog::level::debug;
    } else {
      throw ConfigError(fmt::format("SG_LOG must be error, info or debug, got '{}'", v));
    }
  }
  auto logger = spdlog::get("salientgrads");
  if (!logger) logger = spdlog::stderr_logger_mt("salientgrads");
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(level);
}

}  // namespace salientgrads
