/* Copyright 2026 The tdrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "log.hpp"

#include <cstdio>
#include <mutex>

namespace tdrn::log {
namespace {

std::mutex g_mutex;
Sink g_sink = nullptr;
void* g_user = nullptr;
Level g_min = Level::kInfo;

const char* tag(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "?";
}

}  // namespace

void set_sink(Sink sink, void* user) {
  std::lock_guard lock(g_mutex);
  g_sink = sink;
  g_user = user;
}

void set_min_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_min = level;
}

void write(Level level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (level < g_min) return;
  if (g_sink) {
    g_sink(static_cast<int>(level), message.c_str(), g_user);
    return;
  }
  std::fprintf(stderr, "[tdrn %s] %s\n", tag(level), message.c_str());
}

}  // namespace tdrn::log
