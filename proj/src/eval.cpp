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

#include "avjoint/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "avjoint/bytes.hpp"
#include "avjoint/error.hpp"

namespace avjoint {

namespace {

constexpr char kCsvHeader[] =
    "epoch,phase,lambda,train_enh,train_asr,valid_enh,valid_asr,valid_per";

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw FormatError("");
    return v;
  } catch (...) {
    throw FormatError(where + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<int> ctc_greedy_decode(const Matrix& logits) {
  if (logits.rows < 1 || logits.cols < 2) {
    throw InvalidInputError("ctc_greedy_decode: logits must be T x P");
  }
  const int blank = logits.cols - 1;
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < logits.rows; ++t) {
    const double* row = logits.row(t);
    int best = 0;
    for (int p = 1; p < logits.cols; ++p) {
      if (row[p] > row[best]) best = p;
    }
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<std::string> ids_to_names(const std::vector<int>& ids,
                                      const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(names.size())) {
      throw InvalidInputError("symbol id " + std::to_string(id) +
                              " outside the phone inventory");
    }
    out.push_back(names[static_cast<size_t>(id)]);
  }
  return out;
}

PhoneMapping parse_phone_mapping(const std::string& text,
                                 const std::string& origin) {
  PhoneMapping mapping;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // No comment syntax: '#' is a legal symbol character (TIMIT's "h#").
    std::istringstream ls(line);
    std::string src, dst, extra;
    if (!(ls >> src)) continue;  // blank line
    const std::string where = origin + ":" + std::to_string(lineno);
    if (!(ls >> dst) || (ls >> extra)) {
      throw FormatError(where + ": expected 'src dst'");
    }
    if (mapping.table.count(src) != 0) {
      throw FormatError(where + ": duplicate entry for '" + src + "'");
    }
    mapping.table[src] = dst == "-" ? std::string() : dst;
  }
  // Idempotence: folding twice must equal folding once, so every surviving
  // destination has to map to itself.
  for (const auto& [src, dst] : mapping.table) {
    if (dst.empty()) continue;
    const auto it = mapping.table.find(dst);
    if (it == mapping.table.end() || it->second != dst) {
      throw FormatError(origin + ": mapping is not idempotent, '" + src +
                        "' folds to '" + dst + "' which does not survive");
    }
  }
  return mapping;
}

PhoneMapping load_phone_mapping(const std::string& path) {
  return parse_phone_mapping(bytes::read_file(path), path);
}

std::vector<std::string> apply_mapping(const std::vector<std::string>& symbols,
                                       const PhoneMapping& mapping) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (const std::string& s : symbols) {
    const auto it = mapping.table.find(s);
    if (it == mapping.table.end()) {
      throw InvalidInputError("phone '" + s + "' has no mapping entry");
    }
    if (!it->second.empty()) out.push_back(it->second);
  }
  return out;
}

EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  const int R = static_cast<int>(ref.size());
  const int Y = static_cast<int>(hyp.size());
  struct Cell {
    int cost;
    EditCounts counts;
  };
  std::vector<Cell> prev(static_cast<size_t>(Y) + 1), cur(prev.size());
  for (int j = 0; j <= Y; ++j) {
    prev[static_cast<size_t>(j)] = {j, EditCounts{0, j, 0}};
  }
  for (int i = 1; i <= R; ++i) {
    cur[0] = {i, EditCounts{0, 0, i}};
    for (int j = 1; j <= Y; ++j) {
      const bool match = ref[static_cast<size_t>(i) - 1] ==
                         hyp[static_cast<size_t>(j) - 1];
      // Candidates in tie-break order: substitution/match, insertion,
      // deletion. Later candidates replace only on strictly lower cost.
      Cell best = prev[static_cast<size_t>(j) - 1];
      best.cost += match ? 0 : 1;
      if (!match) ++best.counts.sub;
      if (cur[static_cast<size_t>(j) - 1].cost + 1 < best.cost) {
        best = cur[static_cast<size_t>(j) - 1];
        ++best.cost;
        ++best.counts.ins;
      }
      if (prev[static_cast<size_t>(j)].cost + 1 < best.cost) {
        best = prev[static_cast<size_t>(j)];
        ++best.cost;
        ++best.counts.del;
      }
      cur[static_cast<size_t>(j)] = best;
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<size_t>(Y)].counts;
}

ScoreReport score(const std::vector<std::vector<std::string>>& refs,
                  const std::vector<std::vector<std::string>>& hyps,
                  const PhoneMapping* mapping) {
  if (refs.size() != hyps.size()) {
    throw InvalidInputError("score: reference/hypothesis count mismatch");
  }
  ScoreReport report;
  report.per_utt.reserve(refs.size());
  for (size_t u = 0; u < refs.size(); ++u) {
    std::vector<std::string> r = refs[u];
    std::vector<std::string> h = hyps[u];
    if (mapping != nullptr) {
      r = apply_mapping(r, *mapping);
      h = apply_mapping(h, *mapping);
    }
    const EditCounts c = edit_distance(r, h);
    report.per_utt.push_back(c);
    report.totals.sub += c.sub;
    report.totals.ins += c.ins;
    report.totals.del += c.del;
    report.ref_len += static_cast<int>(r.size());
  }
  if (report.ref_len == 0) {
    throw InvalidInputError("score: references are empty after mapping");
  }
  report.per = 100.0 * report.totals.total() / report.ref_len;
  return report;
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& rows) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const EpochRecord& r : rows) {
    for (double v : {r.lambda, r.train_enh, r.train_asr, r.valid_enh,
                     r.valid_asr, r.valid_per}) {
      if (!std::isfinite(v)) {
        throw NumericError("history has a non-finite value at epoch " +
                           std::to_string(r.epoch));
      }
    }
    out += std::to_string(r.epoch);
    out.push_back(',');
    out += r.phase;
    for (double v : {r.lambda, r.train_enh, r.train_asr, r.valid_enh,
                     r.valid_asr, r.valid_per}) {
      out.push_back(',');
      out += fmt9(v);
    }
    out.push_back('\n');
  }
  bytes::write_file(path, out);
}

std::vector<EpochRecord> read_history_csv(const std::string& path) {
  std::istringstream is(bytes::read_file(path));
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw FormatError(path + ": missing history header");
  }
  std::vector<EpochRecord> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto cells = split(line, ',');
    if (cells.size() != 8) throw FormatError(where + ": expected 8 columns");
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(cells[0], where));
    r.phase = cells[1];
    r.lambda = parse_double(cells[2], where);
    r.train_enh = parse_double(cells[3], where);
    r.train_asr = parse_double(cells[4], where);
    r.valid_enh = parse_double(cells[5], where);
    r.valid_asr = parse_double(cells[6], where);
    r.valid_per = parse_double(cells[7], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace avjoint
