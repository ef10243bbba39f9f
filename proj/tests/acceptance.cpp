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

// Acceptance runner: one self-contained check per release criterion, one
// PASS/FAIL line each, nonzero exit if anything fails. Unlike the unit
// tests these run the full desk-scale recipes, so the slowest checks take
// tens of seconds. argv[1] is the CLI binary, used by the determinism check.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "avjoint/error.hpp"
#include "avjoint/features.hpp"
#include "avjoint/losses.hpp"
#include "avjoint/net.hpp"
#include "avjoint/rng.hpp"
#include "avjoint/training.hpp"
#include "oracles.hpp"

namespace {

using namespace avjoint;
namespace fs = std::filesystem;

// Thrown by a check to fail its criterion with a reason.
struct Failure {
  std::string detail;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw Failure{detail};
}

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// Desk-scale recipe shared by the training checks; the CLI desk preset
// carries the same numbers.
CorpusConfig desk_corpus(int utterances) {
  CorpusConfig c;
  c.num_utterances = utterances;
  c.t_min = 20;
  c.t_max = 30;
  c.num_bins = 16;
  c.visual_dim = 3;
  c.num_phones = 4;
  c.labels_min = 2;
  c.labels_max = 4;
  c.interferer_gain = 1.0;
  c.noise_level = 0.02;
  c.visual_noise = 0.05;
  return c;
}

Model desk_model(const Corpus& corpus, Arch arch, uint64_t seed) {
  Model m;
  m.arch = arch;
  m.cfg.z_enh = 2;
  m.cfg.z_asr = 2;
  m.cfg.hidden = 8;
  m.cfg.num_bins = corpus.num_bins;
  m.cfg.visual_dim = corpus.visual_dim;
  m.cfg.mel_channels = 8;
  m.cfg.num_symbols = corpus.num_symbols;
  m.cfg.validate(arch);
  m.store = init_params(m.cfg, arch, seed);
  m.mel = mel_filterbank(m.cfg.mel_channels, m.cfg.num_bins, 8000.0);
  if (arch == Arch::kJoint) m.d = compute_std_vector(corpus);
  return m;
}

// FNV-1a over the raw bytes of one parameter partition, in array-name
// order. Bit-identity of a partition implies equal checksums.
uint64_t side_checksum(const ParameterStore& store, bool enh_side) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& [name, m] : store.arrays) {
    if (ParameterStore::is_enh(name) != enh_side) continue;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data.data());
    const size_t n = m.data.size() * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Joint-model gradients match central finite differences for both losses.

std::string check_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  // Viable (mel channels, bins) pairs within the small-dimension budget.
  const std::array<std::pair<int, int>, 3> cn = {{{2, 8}, {3, 8}, {4, 8}}};
  double worst = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    ModelConfig cfg;
    cfg.z_enh = 1 + seed % 2;
    cfg.z_asr = 1 + (seed / 2) % 2;
    cfg.hidden = rng.uniform_int(2, 4);
    const auto [c, n] = cn[rng.uniform_int(0, 2)];
    cfg.mel_channels = c;
    cfg.num_bins = n;
    cfg.visual_dim = rng.uniform_int(1, 3);
    cfg.num_symbols = rng.uniform_int(2, 4);
    cfg.validate(Arch::kJoint);

    const int t = rng.uniform_int(3, 6);
    ParameterStore store = init_params(cfg, Arch::kJoint, 9000 + seed);
    StdVector d;
    d.d.resize(cfg.num_bins);
    for (double& v : d.d) v = rng.uniform(0.3, 1.2);

    Utterance u;
    u.id = "g";
    u.mixture.frames = random_matrix(rng, t, cfg.num_bins, 0.0, 2.0);
    u.clean.frames = random_matrix(rng, t, cfg.num_bins, 0.0, 2.0);
    u.visual.frames = random_matrix(rng, t, cfg.visual_dim);
    for (;;) {
      u.labels.symbols.clear();
      const int len = rng.uniform_int(1, 2);
      for (int i = 0; i < len; ++i)
        u.labels.symbols.push_back(rng.uniform_int(0, cfg.num_symbols - 2));
      if (u.labels.min_frames() <= t) break;
    }

    MelFilterbank mel =
        mel_filterbank(cfg.mel_channels, cfg.num_bins, 8000.0);
    JointCache jc = joint_forward(cfg, store, u, mel, d);
    LossValue mse = mse_loss(jc.enh.y, u.clean.frames);
    LossValue ctc = ctc_loss(jc.asr.logits, u.labels);

    auto enh_loss = [&](const ParameterStore& p) {
      return mse_loss(joint_forward(cfg, p, u, mel, d).enh.y, u.clean.frames)
          .value;
    };
    auto asr_loss = [&](const ParameterStore& p) {
      return ctc_loss(joint_forward(cfg, p, u, mel, d).asr.logits, u.labels)
          .value;
    };

    GradStore ge = joint_backward(cfg, store, mel, d, jc, &mse.grad, nullptr);
    GradCheckReport re = grad_check(enh_loss, store, ge, 1e-4);
    require(re.passed, fmt("seed %d enhancement loss: %s rel err %.3g", seed,
                           re.worst_array.c_str(), re.max_rel_err));

    GradStore ga = joint_backward(cfg, store, mel, d, jc, nullptr, &ctc.grad);
    GradCheckReport ra = grad_check(asr_loss, store, ga, 1e-4);
    require(ra.passed, fmt("seed %d recognizer loss: %s rel err %.3g", seed,
                           ra.worst_array.c_str(), ra.max_rel_err));

    worst = std::max({worst, re.max_rel_err, ra.max_rel_err});
  }
  const double elapsed = seconds_since(t0);
  require(elapsed <= 120.0, fmt("took %.1fs, budget 120s", elapsed));
  return fmt("20 seeds, both losses, max rel err %.2e, %.1fs", worst, elapsed);
}

// ---------------------------------------------------------------------------
// 2. CTC equals brute-force path enumeration; gradient rows sum to zero.

std::string check_ctc_oracle() {
  Rng rng(4242);
  double worst_prob = 0.0;
  double worst_row = 0.0;
  for (int cases = 0; cases < 200; ++cases) {
    const int t = rng.uniform_int(1, 6);
    const int p = rng.uniform_int(2, 4);
    Matrix logits = random_matrix(rng, t, p, -3.0, 3.0);
    PhoneSequence labels;
    for (;;) {
      labels.symbols.clear();
      const int len = rng.uniform_int(0, 3);
      for (int i = 0; i < len; ++i)
        labels.symbols.push_back(rng.uniform_int(0, p - 2));
      if (labels.min_frames() <= t) break;
    }
    LossValue l = ctc_loss(logits, labels);
    const double brute = oracles::ctc_brute_prob(logits, labels.symbols);
    worst_prob = std::max(worst_prob, std::abs(std::exp(-l.value) - brute));
    require(std::abs(std::exp(-l.value) - brute) <= 1e-9,
            fmt("case %d: |prob - brute| = %.3g", cases,
                std::abs(std::exp(-l.value) - brute)));
    for (int r = 0; r < t; ++r) {
      double row = 0.0;
      for (int c = 0; c < p; ++c) row += l.grad.at(r, c);
      worst_row = std::max(worst_row, std::abs(row));
      require(std::abs(row) <= 1e-10,
              fmt("case %d frame %d: grad sum %.3g", cases, r, row));
    }
  }
  return fmt("200 cases, max |prob err| %.2e, max frame grad sum %.2e",
             worst_prob, worst_row);
}

// ---------------------------------------------------------------------------
// 3. CTC probabilities over all feasible label sequences sum to one.

std::string check_ctc_normalization() {
  Rng rng(4343);
  double worst = 0.0;
  for (int t = 1; t <= 4; ++t) {
    for (int p : {2, 3}) {
      Matrix logits = random_matrix(rng, t, p, -2.0, 2.0);
      double total = 0.0;
      for (const auto& labels : oracles::all_label_sequences(p - 1, t)) {
        PhoneSequence s;
        s.symbols = labels;
        if (s.min_frames() > t) continue;
        total += std::exp(-ctc_loss(logits, s).value);
      }
      worst = std::max(worst, std::abs(total - 1.0));
      require(std::abs(total - 1.0) <= 1e-8,
              fmt("T=%d P=%d: sum %.12f", t, p, total));
    }
  }
  return fmt("T 1..4 x P {2,3}, max |sum - 1| %.2e", worst);
}

// ---------------------------------------------------------------------------
// 4. Two-stream PIT equals the explicit minimum over both assignments.

std::string check_pit_oracle() {
  Rng rng(4444);
  double worst = 0.0;
  for (int cases = 0; cases < 100; ++cases) {
    const int t = rng.uniform_int(2, 5);
    const int n = rng.uniform_int(2, 6);
    Matrix s0 = random_matrix(rng, t, n);
    Matrix s1 = random_matrix(rng, t, n);
    Matrix t0 = random_matrix(rng, t, n);
    Matrix t1 = random_matrix(rng, t, n);
    PitResult pit = pit_mse({&s0, &s1}, {&t0, &t1});
    const double identity =
        0.5 * (mse_loss(s0, t0).value + mse_loss(s1, t1).value);
    const double swapped =
        0.5 * (mse_loss(s0, t1).value + mse_loss(s1, t0).value);
    const double explicit_min = std::min(identity, swapped);
    worst = std::max(worst, std::abs(pit.value - explicit_min));
    require(std::abs(pit.value - explicit_min) <= 1e-12,
            fmt("case %d: |pit - min| = %.3g", cases,
                std::abs(pit.value - explicit_min)));
    require(pit.value <= identity,
            fmt("case %d: pit %.12f above identity %.12f", cases, pit.value,
                identity));
  }
  return fmt("100 cases, max |pit - explicit min| %.2e", worst);
}

// ---------------------------------------------------------------------------
// 5. The decade-ratio coefficient brings both losses within one decade.

std::string check_lambda_property() {
  const double worked = lambda_adapt(50.0, 0.003);
  require(worked == 1e4, fmt("lambda(50, 0.003) = %.6g, want 1e4", worked));
  Rng rng(4545);
  for (int i = 0; i < 1000; ++i) {
    const double l_asr = std::pow(10.0, rng.uniform(-6.0, 3.0));
    const double l_enh = std::pow(10.0, rng.uniform(-6.0, 3.0));
    const double lambda = lambda_adapt(l_asr, l_enh);
    const int diff =
        static_cast<int>(std::floor(std::log10(lambda * l_enh)) -
                         std::floor(std::log10(l_asr)));
    require(diff >= -1 && diff <= 1,
            fmt("pair %d (%.3g, %.3g): decade gap %d", i, l_asr, l_enh, diff));
  }
  return "1000 pairs in decade band, worked example exact";
}

// ---------------------------------------------------------------------------
// 6. Frozen alternation leaves the off-phase partition bit-identical.

std::string check_freeze_soundness() {
  Corpus train = synth_corpus(desk_corpus(12), 601);
  Corpus valid = synth_corpus(desk_corpus(4), 602);
  Model m = desk_model(train, Arch::kJoint, 6);
  const uint64_t enh0 = side_checksum(m.store, true);
  const uint64_t asr0 = side_checksum(m.store, false);

  ScheduleConfig sc;
  sc.strategy = Strategy::kAlternated;
  sc.total_epochs = 8;
  sc.epochs_per_phase = 2;
  sc.freeze = true;
  sc.seed = 88;
  sc.adam.lr = 3e-3;

  std::vector<std::string> phases;
  std::vector<uint64_t> enh_sums, asr_sums;
  run_strategy(&m, train, valid, sc,
               [&](const Model& model, const EpochRecord& rec) {
                 phases.push_back(rec.phase);
                 enh_sums.push_back(side_checksum(model.store, true));
                 asr_sums.push_back(side_checksum(model.store, false));
               });

  require(phases.size() == 8, fmt("expected 8 epochs, got %zu", phases.size()));
  int phase_changes = 0;
  for (size_t e = 0; e < phases.size(); ++e) {
    require(phases[e] == ((e / 2) % 2 == 0 ? "enh" : "asr"),
            fmt("epoch %zu tagged %s", e, phases[e].c_str()));
    if (e > 0 && phases[e] != phases[e - 1]) ++phase_changes;
    const uint64_t prev_enh = e == 0 ? enh0 : enh_sums[e - 1];
    const uint64_t prev_asr = e == 0 ? asr0 : asr_sums[e - 1];
    if (phases[e] == "asr") {
      require(enh_sums[e] == prev_enh,
              fmt("epoch %zu: enhancement arrays moved in a frozen "
                  "recognizer phase", e));
      require(asr_sums[e] != prev_asr,
              fmt("epoch %zu: recognizer phase left its own arrays", e));
    } else {
      require(asr_sums[e] == prev_asr,
              fmt("epoch %zu: recognizer arrays moved in an enhancement "
                  "phase", e));
      require(enh_sums[e] != prev_enh,
              fmt("epoch %zu: enhancement phase left its own arrays", e));
    }
  }
  require(phase_changes == 3, fmt("%d phase changes, want 3", phase_changes));
  return "4 phases, off-phase partition checksums bit-identical";
}

// ---------------------------------------------------------------------------
// 7. Unfrozen second-phase recognizer training degrades the enhancement
//    loss; freezing pins it.

std::string check_two_phase_divergence() {
  const auto t0 = std::chrono::steady_clock::now();
  Corpus train = synth_corpus(desk_corpus(100), 1001);
  Corpus valid = synth_corpus(desk_corpus(12), 1002);
  double ratios[2] = {0.0, 0.0};
  for (const bool freeze : {false, true}) {
    Model m = desk_model(train, Arch::kJoint, 7);
    ScheduleConfig sc;
    sc.strategy = Strategy::kTwoFullPhases;
    sc.total_epochs = 100;
    sc.seed = 77;
    sc.freeze = freeze;
    sc.plateau.patience = 6;
    sc.plateau.min_delta = 0.01;
    sc.adam.lr = 3e-3;
    const auto hist = run_strategy(&m, train, valid, sc);

    int switch_epoch = -1;
    for (size_t e = 0; e < hist.size(); ++e) {
      if (hist[e].phase == "asr") {
        switch_epoch = static_cast<int>(e);
        break;
      }
    }
    require(switch_epoch > 0, "enhancement phase never plateaued");
    const double at_switch = hist[switch_epoch - 1].valid_enh;
    const double at_end = hist.back().valid_enh;
    ratios[freeze ? 1 : 0] = at_end / at_switch;
  }
  require(ratios[0] >= 1.5,
          fmt("unfrozen run: L_enh grew x%.2f, want >= 1.5", ratios[0]));
  require(std::abs(ratios[1] - 1.0) < 0.01,
          fmt("frozen run: L_enh changed %.3f%%, want < 1%%",
              100.0 * std::abs(ratios[1] - 1.0)));
  const double elapsed = seconds_since(t0);
  require(elapsed <= 600.0, fmt("took %.1fs, budget 600s", elapsed));
  return fmt("unfrozen L_enh x%.2f after switch, frozen x%.4f, %.1fs",
             ratios[0], ratios[1], elapsed);
}

// ---------------------------------------------------------------------------
// 8. Joint training beats the mixed-audio recognizer baseline on the
//    training set for most seeds.

std::string check_joint_beats_baseline() {
  Corpus train = synth_corpus(desk_corpus(100), 1001);
  Corpus valid = synth_corpus(desk_corpus(12), 1002);
  int wins = 0;
  std::string detail;
  for (const uint64_t seed : {11, 22, 33, 44, 55}) {
    ScheduleConfig sc;
    sc.strategy = Strategy::kAlternated;
    sc.total_epochs = 120;
    sc.epochs_per_phase = 10;
    sc.freeze = true;
    sc.seed = seed + 1;
    sc.adam.lr = 3e-3;

    Model joint = desk_model(train, Arch::kJoint, seed);
    run_strategy(&joint, train, valid, sc);
    const double per_joint = evaluate(joint, train).per;

    Model baseline = desk_model(train, Arch::kAsrOnly, seed);
    run_strategy(&baseline, train, valid, sc);
    const double per_base = evaluate(baseline, train).per;

    if (per_joint < per_base) ++wins;
    detail += fmt("%s%.1f/%.1f", detail.empty() ? "" : " ", per_joint,
                  per_base);
  }
  require(wins >= 4, fmt("joint won %d/5 (train PER joint/baseline: %s)",
                         wins, detail.c_str()));
  return fmt("joint below baseline %d/5 (train PER joint/baseline: %s)",
             wins, detail.c_str());
}

// ---------------------------------------------------------------------------
// 9. The joint model can drive training PER to 10% on a 20-utterance set.

std::string check_overfit() {
  Corpus small = synth_corpus(desk_corpus(20), 2001);
  Model m = desk_model(small, Arch::kJoint, 9);
  AdamState adam = AdamState::init(m.store);
  AdamConfig acfg;
  acfg.lr = 3e-3;
  const JointLossConfig jcfg;
  for (int e = 0; e < 500; ++e) {
    run_epoch(&m, small, Objective::kJoint, jcfg, UpdateMask::kAll, &adam,
              acfg, 3000 + e);
    if ((e + 1) % 10 == 0) {
      const double per = evaluate(m, small).per;
      if (per <= 10.0)
        return fmt("train PER %.1f%% at epoch %d of 500", per, e + 1);
    }
  }
  throw Failure{fmt("train PER %.1f%% after 500 epochs, want <= 10%%",
                    evaluate(m, small).per)};
}

// ---------------------------------------------------------------------------
// 10. Training through the CLI is byte-deterministic.

std::string check_determinism(const std::string& cli) {
  require(!cli.empty(), "CLI binary path missing (argv[1])");
  const fs::path root =
      fs::temp_directory_path() /
      fmt("avjoint_accept_%llu",
          static_cast<unsigned long long>(
              std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(root);
  const fs::path log = root / "cli.log";
  auto run = [&](const std::string& args) {
    const std::string cmd =
        cli + " " + args + " >> " + log.string() + " 2>&1";
    require(std::system(cmd.c_str()) == 0, "command failed: " + cmd);
  };

  // Small config so two full runs stay quick; shapes are otherwise desk.
  std::ofstream cfg(root / "config.json");
  cfg << "{\n"
      << "  \"corpus\": {\"num_utterances\": 10, \"t_min\": 8, \"t_max\": 12,"
      << " \"num_bins\": 8, \"visual_dim\": 2, \"num_phones\": 3,"
      << " \"labels_min\": 1, \"labels_max\": 2},\n"
      << "  \"model\": {\"hidden\": 4, \"mel_channels\": 4},\n"
      << "  \"schedule\": {\"total_epochs\": 6, \"epochs_per_phase\": 2},\n"
      << "  \"train_corpus\": \"" << (root / "train").generic_string()
      << "\",\n"
      << "  \"valid_corpus\": \"" << (root / "valid").generic_string()
      << "\"\n}\n";
  cfg.close();
  const std::string c = " --config " + (root / "config.json").string();

  run("gen-corpus" + c + " --out " + (root / "train").string() + " --seed 501");
  run("gen-corpus" + c + " --out " + (root / "valid").string() + " --seed 502");
  run("train" + c + " --out " + (root / "run1").string() + " --seed 9");
  run("train" + c + " --out " + (root / "run2").string() + " --seed 9");

  const bool csv_equal = read_bytes(root / "run1" / "history.csv") ==
                         read_bytes(root / "run2" / "history.csv");
  const bool ckpt_equal = read_bytes(root / "run1" / "checkpoint.bin") ==
                          read_bytes(root / "run2" / "checkpoint.bin");
  fs::remove_all(root);
  require(csv_equal, "history.csv differs between identical runs");
  require(ckpt_equal, "checkpoint.bin differs between identical runs");
  return "two CLI train runs byte-identical (history.csv, checkpoint.bin)";
}

// ---------------------------------------------------------------------------
// 11. Edit distance matches exhaustive enumeration; identical sets score 0.

std::string check_scoring() {
  Rng rng(4646);
  const std::vector<std::string> alphabet = {"a", "b", "c"};
  auto random_seq = [&](int max_len) {
    std::vector<std::string> s;
    const int len = rng.uniform_int(0, max_len);
    for (int i = 0; i < len; ++i) s.push_back(alphabet[rng.uniform_int(0, 2)]);
    return s;
  };
  for (int cases = 0; cases < 500; ++cases) {
    const auto ref = random_seq(8);
    const auto hyp = random_seq(8);
    const int got = edit_distance(ref, hyp).total();
    const int want = oracles::edit_cost(ref, hyp);
    require(got == want,
            fmt("case %d: edit distance %d, enumeration %d", cases, got,
                want));
  }
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 20; ++i) refs.push_back(random_seq(8));
  if (refs[0].empty()) refs[0] = {"a"};  // nonzero reference length
  const ScoreReport report = score(refs, refs);
  require(report.per == 0.0,
          fmt("identical ref/hyp scored PER %.12f", report.per));
  return "500 pairs match enumeration, identical sets score exactly 0";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<std::string()>>>
      criteria = {
          {"joint gradients vs finite differences",
           [] { return check_gradients(); }},
          {"ctc vs path enumeration", [] { return check_ctc_oracle(); }},
          {"ctc normalization", [] { return check_ctc_normalization(); }},
          {"pit vs explicit minimum", [] { return check_pit_oracle(); }},
          {"adaptive lambda decade band",
           [] { return check_lambda_property(); }},
          {"freeze soundness", [] { return check_freeze_soundness(); }},
          {"two-phase enhancement divergence",
           [] { return check_two_phase_divergence(); }},
          {"joint vs mixed-audio baseline",
           [] { return check_joint_beats_baseline(); }},
          {"small-corpus overfit", [] { return check_overfit(); }},
          {"cli determinism", [&] { return check_determinism(cli); }},
          {"scoring correctness", [] { return check_scoring(); }},
      };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    std::string verdict, detail;
    try {
      detail = criteria[i].second();
      verdict = "PASS";
    } catch (const Failure& f) {
      detail = f.detail;
      verdict = "FAIL";
      ++failures;
    } catch (const std::exception& e) {
      detail = std::string("unexpected error: ") + e.what();
      verdict = "FAIL";
      ++failures;
    }
    std::printf("criterion %2zu: %s - %s (%s)\n", i + 1, verdict.c_str(),
                detail.c_str(), criteria[i].first.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/%zu criteria passed\n",
              criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
