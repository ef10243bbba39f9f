// Copyright 2026 The avjoint Authors
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

#include "avjoint/corpus_io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "avjoint/bytes.hpp"
#include "avjoint/error.hpp"

namespace avjoint {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using bytes::get_f64;
using bytes::get_u64;
using bytes::put_f64;
using bytes::put_u64;
using bytes::read_file;
using bytes::write_file;

void append_matrix(std::string& out, const Matrix& m) {
  for (double v : m.data) put_f64(out, v);
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = "avjoint-corpus-v1";
  manifest["num_bins"] = corpus.num_bins;
  manifest["visual_dim"] = corpus.visual_dim;
  manifest["num_symbols"] = corpus.num_symbols;
  manifest["phones"] = corpus.phone_names;
  json utts = json::array();
  for (const Utterance& u : corpus.utterances) {
    utts.push_back({{"id", u.id}, {"frames", u.num_frames()}});
  }
  manifest["utterances"] = utts;
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");

  for (const Utterance& u : corpus.utterances) {
    std::string bin;
    const uint64_t mix_n = u.mixture.frames.size();
    const uint64_t clean_n = u.clean.frames.size();
    const uint64_t vis_n = u.visual.frames.size();
    const uint64_t intf_n =
        u.interferer_clean ? u.interferer_clean->frames.size() : 0;
    bin.reserve(32 + 8 * (mix_n + clean_n + vis_n + intf_n));
    put_u64(bin, mix_n);
    put_u64(bin, clean_n);
    put_u64(bin, vis_n);
    put_u64(bin, intf_n);
    append_matrix(bin, u.mixture.frames);
    append_matrix(bin, u.clean.frames);
    append_matrix(bin, u.visual.frames);
    if (u.interferer_clean) append_matrix(bin, u.interferer_clean->frames);
    write_file(fs::path(dir) / (u.id + ".bin"), bin);

    std::string phn;
    for (size_t i = 0; i < u.labels.symbols.size(); ++i) {
      if (i > 0) phn += ' ';
      const int s = u.labels.symbols[i];
      if (s < 0 || s >= static_cast<int>(corpus.phone_names.size())) {
        throw InvalidInputError("save_corpus: utterance " + u.id +
                                " has label id outside the inventory");
      }
      phn += corpus.phone_names[s];
    }
    phn += '\n';
    write_file(fs::path(dir) / (u.id + ".phn"), phn);
  }
}

Corpus load_corpus(const std::string& dir) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("corpus manifest is not valid JSON: " +
                      std::string(e.what()));
  }

  Corpus corpus;
  try {
    if (manifest.at("format").get<std::string>() != "avjoint-corpus-v1") {
      throw FormatError("unknown corpus format tag");
    }
    corpus.num_bins = manifest.at("num_bins").get<int>();
    corpus.visual_dim = manifest.at("visual_dim").get<int>();
    corpus.num_symbols = manifest.at("num_symbols").get<int>();
    corpus.phone_names =
        manifest.at("phones").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("corpus manifest missing fields: " +
                      std::string(e.what()));
  }
  if (corpus.num_symbols != static_cast<int>(corpus.phone_names.size()) + 1) {
    throw FormatError("corpus manifest: num_symbols disagrees with phones");
  }
  std::map<std::string, int> phone_id;
  for (size_t i = 0; i < corpus.phone_names.size(); ++i) {
    phone_id[corpus.phone_names[i]] = static_cast<int>(i);
  }

  if (!manifest.contains("utterances") || !manifest["utterances"].is_array()) {
    throw FormatError("corpus manifest missing utterance list");
  }
  for (const json& entry : manifest["utterances"]) {
    std::string id;
    int frames = 0;
    try {
      id = entry.at("id").get<std::string>();
      frames = entry.at("frames").get<int>();
    } catch (const json::exception&) {
      throw FormatError("corpus manifest has a malformed utterance entry");
    }
    auto fail = [&id](const std::string& what) {
      throw FormatError("utterance " + id + ": " + what);
    };
    if (frames < 1) fail("nonpositive frame count in manifest");

    const std::string bin = read_file(root / (id + ".bin"));
    if (bin.size() < 32) fail("binary payload shorter than its length table");
    const uint64_t mix_n = get_u64(bin, 0);
    const uint64_t clean_n = get_u64(bin, 8);
    const uint64_t vis_n = get_u64(bin, 16);
    const uint64_t intf_n = get_u64(bin, 24);
    const uint64_t want_mix =
        static_cast<uint64_t>(frames) * corpus.num_bins;
    const uint64_t want_vis =
        static_cast<uint64_t>(frames) * corpus.visual_dim;
    if (mix_n != want_mix) fail("mixture length disagrees with manifest dims");
    if (clean_n != want_mix) fail("clean length disagrees with manifest dims");
    if (vis_n != want_vis) fail("visual length disagrees with manifest dims");
    if (intf_n != 0 && intf_n != want_mix) {
      fail("interferer length disagrees with manifest dims");
    }
    const uint64_t total = mix_n + clean_n + vis_n + intf_n;
    if (bin.size() != 32 + 8 * total) fail("binary payload truncated");

    Utterance u;
    u.id = id;
    size_t off = 32;
    auto read_mat = [&bin, &off](Matrix& m, int rows, int cols) {
      m = Matrix(rows, cols);
      for (size_t i = 0; i < m.data.size(); ++i, off += 8) {
        m.data[i] = get_f64(bin, off);
      }
    };
    read_mat(u.mixture.frames, frames, corpus.num_bins);
    read_mat(u.clean.frames, frames, corpus.num_bins);
    read_mat(u.visual.frames, frames, corpus.visual_dim);
    if (intf_n != 0) {
      CleanTarget intf;
      read_mat(intf.frames, frames, corpus.num_bins);
      u.interferer_clean = std::move(intf);
    }

    std::istringstream phn(read_file(root / (id + ".phn")));
    std::string sym;
    while (phn >> sym) {
      auto it = phone_id.find(sym);
      if (it == phone_id.end()) fail("unknown phone symbol '" + sym + "'");
      u.labels.symbols.push_back(it->second);
    }
    if (u.labels.symbols.empty()) fail("empty phone transcription");

    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace avjoint
