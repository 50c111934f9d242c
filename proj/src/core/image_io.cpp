/*
 * Copyright 2026 The Semistream Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "image_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "errors.hpp"

namespace semistream::image {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Next whitespace-delimited PPM header token; '#' comments run to end of line.
std::string header_token(const std::string& s, std::size_t& pos) {
  for (;;) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

int positive(const std::string& tok, const char* what) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(tok, &used);
    if (used != tok.size()) v = 0;
  } catch (const std::exception&) {
    v = 0;
  }
  if (v <= 0) throw FormatError(std::string("image header: bad ") + what + " '" + tok + "'");
  return v;
}

QTensor fill(const std::string& bytes, std::size_t offset, Dims d, QuantParams q) {
  if (bytes.size() - offset < d.elements()) {
    std::ostringstream os;
    os << "image payload holds " << bytes.size() - offset << " bytes, header promises " << d.elements();
    throw FormatError(os.str());
  }
  QTensor t(d, q);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(offset), d.elements(), t.data.begin());
  return t;
}

}  // namespace

QTensor read_image(const std::filesystem::path& path, QuantParams q) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos);
  if (magic == "P6") {
    const int w = positive(header_token(bytes, pos), "width");
    const int h = positive(header_token(bytes, pos), "height");
    const int maxval = positive(header_token(bytes, pos), "maxval");
    if (maxval != 255) throw FormatError("only 8-bit PPM images (maxval 255) are supported");
    ++pos;  // single whitespace before the raster
    return fill(bytes, pos, Dims{h, w, 3}, q);
  }
  if (magic == "RAWHWC") {
    const int h = positive(header_token(bytes, pos), "height");
    const int w = positive(header_token(bytes, pos), "width");
    const int c = positive(header_token(bytes, pos), "channels");
    if (pos >= bytes.size() || bytes[pos] != '\n') throw FormatError("raw image header must end with a newline");
    return fill(bytes, pos + 1, Dims{h, w, c}, q);
  }
  throw FormatError("unrecognized image format in " + path.string() + " (expected P6 or RAWHWC)");
}

void write_ppm(const QTensor& t, const std::filesystem::path& path) {
  if (t.dims.channels != 3) throw ShapeError("PPM images need 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << t.dims.width << ' ' << t.dims.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_raw(const QTensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "RAWHWC " << t.dims.height << ' ' << t.dims.width << ' ' << t.dims.channels << '\n';
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace semistream::image
