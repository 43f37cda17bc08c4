// Copyright 2026 The AARQA Authors.
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

#include "aarqa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aarqa/error.hpp"

namespace aarqa {

namespace {

constexpr const char* kFormat = "aarqa-checkpoint-v1";

void put_f64(std::string& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest) {
  std::filesystem::path blob_path = manifest;
  blob_path.replace_extension(".bin");

  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["blob"] = blob_path.filename().string();
  doc["meta"] = ckpt.meta;
  doc["tensors"] = nlohmann::json::array();
  std::string blob;
  for (const auto& t : ckpt.tensors) {
    doc["tensors"].push_back({{"name", t.name},
                              {"shape", {t.value.rows(), t.value.cols()}},
                              {"offset", blob.size()}});
    for (Eigen::Index i = 0; i < t.value.size(); ++i) put_f64(blob, t.value.data()[i]);
  }

  std::ofstream bout(blob_path, std::ios::binary);
  if (!bout) throw IoError("cannot write checkpoint blob " + blob_path.string());
  bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::ofstream mout(manifest, std::ios::binary);
  if (!mout) throw IoError("cannot write checkpoint manifest " + manifest.string());
  mout << doc.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream min(manifest);
  if (!min) throw IoError("cannot open checkpoint manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  if (doc.value("format", std::string()) != kFormat) {
    throw ParseError(manifest.string() + ": not an " + kFormat + " manifest");
  }
  const auto blob_path = manifest.parent_path() / doc.at("blob").get<std::string>();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint blob " + blob_path.string());
  std::stringstream buf;
  buf << bin.rdbuf();
  const std::string blob = buf.str();

  Checkpoint ckpt;
  ckpt.meta = doc.value("meta", nlohmann::json::object());
  for (const auto& entry : doc.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<long long>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) {
      throw ParseError(manifest.string() + ": tensor '" + t.name + "' has bad shape");
    }
    const auto count = static_cast<std::size_t>(shape[0] * shape[1]);
    if (offset + 8 * count > blob.size()) {
      throw ParseError(manifest.string() + ": tensor '" + t.name +
                       "' runs past the end of the blob");
    }
    t.value.resize(shape[0], shape[1]);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset);
    for (std::size_t i = 0; i < count; ++i) t.value.data()[i] = get_f64(p + 8 * i);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace aarqa
