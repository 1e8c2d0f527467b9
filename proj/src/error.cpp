// Copyright 2026 The bevcvt Authors
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

#include "error.hpp"

namespace bevcvt {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::Config: return "config";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::BehindCamera: return "behind_camera";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::NoRoute: return "no_route";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Runtime: return "runtime";
  }
  return "unknown";
}

}  // namespace bevcvt
