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

#include "image.hpp"

#include <png.h>

#include <cstring>

#include "error.hpp"

namespace bevcvt {

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    fail(ErrorCode::InvalidArgument, "write_png: unsupported channel count for " + path.string());
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::Io, "write_png: " + path.string() + ": " + msg);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorCode::Io, "read_png: " + path.string() + ": " + png.message);
  }
  const bool grey = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = grey ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image out(static_cast<int>(png.width), static_cast<int>(png.height), grey ? 1 : 3);
  if (!png_image_finish_read(&png, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::Format, "read_png: " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace bevcvt
