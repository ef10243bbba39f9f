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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avjoint/bytes.hpp"
#include "avjoint/corpus_io.hpp"
#include "avjoint/error.hpp"
#include "avjoint/eval.hpp"
#include "avjoint/features.hpp"
#include "avjoint/losses.hpp"
#include "avjoint/net.hpp"
#include "avjoint/rng.hpp"
#include "avjoint/training.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace avjoint;

// ---------------------------------------------------------------------------
// Config handling. The defaults below enumerate the full schema; a user key
// that does not exist in them (or has the wrong type) is rejected, so typos
// fail loudly instead of silently running the default experiment.

json desk_defaults() {
  json j;
  j["seed"] = 1;
  j["train_corpus"] = "";
  j["valid_corpus"] = "";
  j["eval_corpus"] = "";
  j["checkpoint"] = "";
  j["mapping"] = "";
  j["corpus"] = {
      {"num_utterances", 100}, {"t_min", 20},        {"t_max", 30},
      {"num_bins", 16},        {"visual_dim", 3},    {"num_phones", 4},
      {"labels_min", 2},       {"labels_max", 4},    {"interferer_gain", 1.0},
      {"noise_level", 0.02},   {"visual_noise", 0.05}};
  j["model"] = {{"arch", "joint"},
                {"z_enh", 2},
                {"z_asr", 2},
                {"hidden", 8},
                {"mel_channels", 8},
                {"k", 3.0},
                {"asr_input_mode", "audio"},
                {"enh_streams", 1},
                {"enh_uses_visual", true},
                {"identity_mel", false},
                {"sample_rate", 8000.0}};
  j["schedule"] = {{"strategy", "alternated"},
                   {"total_epochs", 120},
                   {"lambda_mode", "fixed"},
                   {"lambda", 1.0},
                   {"epochs_per_phase", 10},
                   {"freeze", true},
                   {"plateau_patience", 6},
                   {"plateau_min_delta", 0.01},
                   {"lr", 3e-3},
                   {"beta1", 0.9},
                   {"beta2", 0.999},
                   {"eps", 1e-8},
                   {"clip_norm", 5.0}};
  j["grad_check"] = {{"cases", 5}, {"tolerance", 1e-4}};
  return j;
}

void apply_paper_preset(json* j) {
  // Paper-scale recurrent stacks: 250 units per direction, two layers each.
  (*j)["model"]["hidden"] = 250;
  (*j)["model"]["z_enh"] = 2;
  (*j)["model"]["z_asr"] = 2;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_into(json* base, const json& user, const std::string& where) {
  if (!user.is_object()) {
    throw InvalidConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = where + "." + key;
    auto it = base->find(key);
    if (it == base->end()) {
      throw InvalidConfigError("unknown config key " + path);
    }
    if (it->is_object()) {
      merge_into(&*it, value, path);
    } else {
      if (!same_kind(*it, value)) {
        throw InvalidConfigError(path + ": wrong type");
      }
      *it = value;
    }
  }
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string preset = "desk";
  uint64_t seed = 0;
  CLI::App* sub = nullptr;
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path,
                  "experiment config file (JSON)");
  sub->add_option("--out", args->out_dir, "output directory");
  sub->add_option("--seed", args->seed, "override the config seed");
  sub->add_option("--preset", args->preset, "base defaults")
      ->check(CLI::IsMember({"desk", "paper"}));
  args->sub = sub;
}

/// Effective config: defaults, then preset, then the user file, then the
/// --seed override. Everything downstream reads only this.
json effective_config(const CommonArgs& args) {
  json cfg = desk_defaults();
  if (args.preset == "paper") apply_paper_preset(&cfg);
  if (!args.config_path.empty()) {
    json user;
    try {
      user = json::parse(bytes::read_file(args.config_path));
    } catch (const json::exception& e) {
      throw InvalidConfigError(args.config_path + ": " + e.what());
    }
    merge_into(&cfg, user, "config");
  }
  if (args.sub->count("--seed") > 0) cfg["seed"] = args.seed;
  return cfg;
}

CorpusConfig corpus_config(const json& j) {
  const json& c = j.at("corpus");
  CorpusConfig cfg;
  cfg.num_utterances = c.at("num_utterances").get<int>();
  cfg.t_min = c.at("t_min").get<int>();
  cfg.t_max = c.at("t_max").get<int>();
  cfg.num_bins = c.at("num_bins").get<int>();
  cfg.visual_dim = c.at("visual_dim").get<int>();
  cfg.num_phones = c.at("num_phones").get<int>();
  cfg.labels_min = c.at("labels_min").get<int>();
  cfg.labels_max = c.at("labels_max").get<int>();
  cfg.interferer_gain = c.at("interferer_gain").get<double>();
  cfg.noise_level = c.at("noise_level").get<double>();
  cfg.visual_noise = c.at("visual_noise").get<double>();
  return cfg;
}

AsrInputMode parse_mode(const std::string& s) {
  if (s == "audio") return AsrInputMode::kAudio;
  if (s == "audio_visual") return AsrInputMode::kAudioVisual;
  if (s == "visual") return AsrInputMode::kVisual;
  throw InvalidConfigError("model.asr_input_mode: unknown value '" + s + "'");
}

Arch parse_arch(const std::string& s) {
  if (s == "joint") return Arch::kJoint;
  if (s == "asr") return Arch::kAsrOnly;
  throw InvalidConfigError("model.arch: unknown value '" + s + "'");
}

Strategy parse_strategy(const std::string& s) {
  if (s == "joint_loss") return Strategy::kJointLoss;
  if (s == "alternated") return Strategy::kAlternated;
  if (s == "two_phase") return Strategy::kTwoFullPhases;
  throw InvalidConfigError("schedule.strategy: unknown value '" + s + "'");
}

/// Model dimensions come from the corpus; the config only picks the
/// architecture knobs.
ModelConfig model_config(const json& j, const Corpus& corpus) {
  const json& m = j.at("model");
  ModelConfig cfg;
  cfg.z_enh = m.at("z_enh").get<int>();
  cfg.z_asr = m.at("z_asr").get<int>();
  cfg.hidden = m.at("hidden").get<int>();
  cfg.num_bins = corpus.num_bins;
  cfg.visual_dim = corpus.visual_dim;
  cfg.mel_channels = m.at("mel_channels").get<int>();
  cfg.num_symbols = corpus.num_symbols;
  cfg.k = m.at("k").get<double>();
  cfg.asr_input_mode = parse_mode(m.at("asr_input_mode").get<std::string>());
  cfg.enh_streams = m.at("enh_streams").get<int>();
  cfg.enh_uses_visual = m.at("enh_uses_visual").get<bool>();
  return cfg;
}

ScheduleConfig schedule_config(const json& j) {
  const json& s = j.at("schedule");
  ScheduleConfig cfg;
  cfg.strategy = parse_strategy(s.at("strategy").get<std::string>());
  cfg.total_epochs = s.at("total_epochs").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  const std::string lm = s.at("lambda_mode").get<std::string>();
  if (lm == "fixed") {
    cfg.joint.mode = JointLossConfig::Mode::kFixed;
  } else if (lm == "adaptive") {
    cfg.joint.mode = JointLossConfig::Mode::kAdaptive;
  } else {
    throw InvalidConfigError("schedule.lambda_mode: unknown value '" + lm +
                             "'");
  }
  cfg.joint.lambda = s.at("lambda").get<double>();
  if (cfg.joint.lambda < 0.0) {
    throw InvalidConfigError("schedule.lambda must be nonnegative");
  }
  cfg.epochs_per_phase = s.at("epochs_per_phase").get<int>();
  cfg.freeze = s.at("freeze").get<bool>();
  cfg.plateau.patience = s.at("plateau_patience").get<int>();
  cfg.plateau.min_delta = s.at("plateau_min_delta").get<double>();
  cfg.adam.lr = s.at("lr").get<double>();
  cfg.adam.beta1 = s.at("beta1").get<double>();
  cfg.adam.beta2 = s.at("beta2").get<double>();
  cfg.adam.eps = s.at("eps").get<double>();
  cfg.adam.clip_norm = s.at("clip_norm").get<double>();
  return cfg;
}

Corpus load_corpus_checked(const std::string& path, const char* role) {
  if (path.empty()) {
    throw InvalidConfigError(std::string(role) + " corpus path is empty");
  }
  Corpus corpus = load_corpus(path);
  validate_corpus(corpus);
  return corpus;
}

void write_echo(const json& cfg, const std::string& out_dir) {
  bytes::write_file(fs::path(out_dir) / "config_echo.json", cfg.dump(2) + "\n");
}

uint64_t fnv1a_bytes(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const CommonArgs& args) {
  const json cfg = effective_config(args);
  if (args.out_dir.empty()) {
    throw InvalidConfigError("gen-corpus needs --out");
  }
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  const Corpus corpus = synth_corpus(corpus_config(cfg), seed);
  validate_corpus(corpus);
  save_corpus(corpus, args.out_dir);
  write_echo(cfg, args.out_dir);
  int frames = 0;
  for (const Utterance& u : corpus.utterances) frames += u.num_frames();
  const std::string manifest =
      bytes::read_file(fs::path(args.out_dir) / "manifest.json");
  std::printf("corpus: %d utterances, %d frames, N=%d M=%d P=%d\n",
              corpus.size(), frames, corpus.num_bins, corpus.visual_dim,
              corpus.num_symbols);
  std::printf("manifest hash: %016llx\n",
              static_cast<unsigned long long>(fnv1a_bytes(manifest)));
  return 0;
}

Model build_model(const json& cfg, const Corpus& train) {
  Model model;
  model.arch = parse_arch(cfg.at("model").at("arch").get<std::string>());
  model.cfg = model_config(cfg, train);
  model.cfg.validate(model.arch);
  const json& m = cfg.at("model");
  model.mel = mel_filterbank(model.cfg.mel_channels, model.cfg.num_bins,
                             m.at("sample_rate").get<double>(),
                             m.at("identity_mel").get<bool>());
  if (model.arch == Arch::kJoint) model.d = compute_std_vector(train);
  model.store = init_params(model.cfg, model.arch,
                            cfg.at("seed").get<uint64_t>());
  return model;
}

int cmd_train(const CommonArgs& args) {
  const json cfg = effective_config(args);
  if (args.out_dir.empty()) {
    throw InvalidConfigError("train needs --out");
  }
  const Corpus train =
      load_corpus_checked(cfg.at("train_corpus").get<std::string>(), "train");
  const Corpus valid =
      load_corpus_checked(cfg.at("valid_corpus").get<std::string>(), "valid");
  if (valid.num_bins != train.num_bins ||
      valid.visual_dim != train.visual_dim ||
      valid.num_symbols != train.num_symbols) {
    throw InvalidInputError("train/valid corpora disagree on dimensions");
  }
  Model model = build_model(cfg, train);
  const ScheduleConfig schedule = schedule_config(cfg);

  fs::create_directories(args.out_dir);
  const std::vector<EpochRecord> history =
      run_strategy(&model, train, valid, schedule);
  write_history_csv((fs::path(args.out_dir) / "history.csv").string(),
                    history);
  Checkpoint ckpt;
  ckpt.arch = model.arch;
  ckpt.cfg = model.cfg;
  ckpt.store = model.store;
  ckpt.d = model.d;
  ckpt.echo = cfg.dump();
  save_checkpoint((fs::path(args.out_dir) / "checkpoint.bin").string(), ckpt);
  write_echo(cfg, args.out_dir);

  const EpochRecord& last = history.back();
  std::printf(
      "trained %d epochs (last phase %s): train_enh=%.6g train_asr=%.6g "
      "valid_per=%.3f\n",
      last.epoch + 1, last.phase.c_str(), last.train_enh, last.train_asr,
      last.valid_per);
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const json cfg = effective_config(args);
  const std::string ckpt_path = cfg.at("checkpoint").get<std::string>();
  if (ckpt_path.empty()) {
    throw InvalidConfigError("eval needs config key 'checkpoint'");
  }
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Corpus corpus =
      load_corpus_checked(cfg.at("eval_corpus").get<std::string>(), "eval");
  if (corpus.num_symbols != ckpt.cfg.num_symbols) {
    throw InvalidInputError("checkpoint and corpus disagree on num_symbols");
  }

  // The filterbank is rebuilt the way training built it; the training-time
  // settings ride along in the checkpoint echo.
  double sample_rate = cfg.at("model").at("sample_rate").get<double>();
  bool identity_mel = cfg.at("model").at("identity_mel").get<bool>();
  if (!ckpt.echo.empty()) {
    try {
      const json echo = json::parse(ckpt.echo);
      sample_rate = echo.at("model").at("sample_rate").get<double>();
      identity_mel = echo.at("model").at("identity_mel").get<bool>();
    } catch (const json::exception&) {
      // foreign checkpoint echo; the current config's values stand
    }
  }
  Model model;
  model.arch = ckpt.arch;
  model.cfg = ckpt.cfg;
  model.store = ckpt.store;
  model.d = ckpt.d;
  model.mel = mel_filterbank(ckpt.cfg.mel_channels, ckpt.cfg.num_bins,
                             sample_rate, identity_mel);

  const EvalStats stats = evaluate(model, corpus);

  std::vector<std::vector<std::string>> refs, hyps;
  std::vector<std::string> ids;
  for (const Utterance& utt : corpus.utterances) {
    const Matrix* logits;
    JointCache jc;
    AsrCache ac;
    if (model.arch == Arch::kJoint) {
      if (model.cfg.enh_streams == 1) {
        jc = joint_forward(model.cfg, model.store, utt, model.mel, model.d, 0);
      } else {
        // score the stream closer to the target, as in training
        EnhCache ec = enh_forward(model.cfg, model.store,
                                  enh_input(model.cfg, utt), model.d);
        const int T = ec.y.rows;
        const int N = model.cfg.num_bins;
        Matrix s0(T, N), s1(T, N);
        for (int t = 0; t < T; ++t) {
          std::copy_n(ec.y.row(t), N, s0.row(t));
          std::copy_n(ec.y.row(t) + N, N, s1.row(t));
        }
        const Matrix* interferer = utt.interferer_clean.has_value()
                                       ? &utt.interferer_clean->frames
                                       : &utt.clean.frames;
        const PitResult pit =
            pit_mse({&s0, &s1}, {&utt.clean.frames, interferer});
        jc = joint_complete(model.cfg, model.store, model.mel, std::move(ec),
                            pit.perm[0] == 0 ? 0 : 1);
      }
      logits = &jc.asr.logits;
      refs.push_back(ids_to_names(utt.labels.symbols, corpus.phone_names));
      hyps.push_back(
          ids_to_names(ctc_greedy_decode(*logits), corpus.phone_names));
    } else {
      Matrix input = utt.visual.frames;
      if (model.cfg.asr_input_mode != AsrInputMode::kVisual) {
        input = mel_warp(model.mel, utt.mixture);
        if (model.cfg.asr_input_mode == AsrInputMode::kAudioVisual) {
          Matrix x(input.rows, input.cols + utt.visual.dim());
          for (int t = 0; t < input.rows; ++t) {
            std::copy_n(input.row(t), input.cols, x.row(t));
            std::copy_n(utt.visual.frames.row(t), utt.visual.dim(),
                        x.row(t) + input.cols);
          }
          input = std::move(x);
        }
      }
      ac = asr_forward(model.cfg, model.store, input);
      refs.push_back(ids_to_names(utt.labels.symbols, corpus.phone_names));
      hyps.push_back(
          ids_to_names(ctc_greedy_decode(ac.logits), corpus.phone_names));
    }
    ids.push_back(utt.id);
  }

  const ScoreReport raw = score(refs, hyps);
  json report;
  report["per_raw"] = raw.per;
  report["enh_loss"] = stats.enh;
  report["asr_loss"] = stats.asr;
  report["asr_skipped"] = stats.asr_skipped;
  json per_utt = json::array();
  const std::string mapping_path = cfg.at("mapping").get<std::string>();
  ScoreReport mapped;
  bool have_mapped = false;
  if (!mapping_path.empty()) {
    const PhoneMapping mapping = load_phone_mapping(mapping_path);
    mapped = score(refs, hyps, &mapping);
    have_mapped = true;
    report["per_mapped"] = mapped.per;
  }
  for (size_t u = 0; u < ids.size(); ++u) {
    json row;
    row["id"] = ids[u];
    row["ref_len"] = refs[u].size();
    row["sub"] = raw.per_utt[u].sub;
    row["ins"] = raw.per_utt[u].ins;
    row["del"] = raw.per_utt[u].del;
    if (have_mapped) {
      row["mapped_sub"] = mapped.per_utt[u].sub;
      row["mapped_ins"] = mapped.per_utt[u].ins;
      row["mapped_del"] = mapped.per_utt[u].del;
    }
    per_utt.push_back(row);
  }
  report["utterances"] = std::move(per_utt);

  const std::string text = report.dump(2) + "\n";
  std::fputs(text.c_str(), stdout);
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    bytes::write_file(fs::path(args.out_dir) / "eval.json", text);
  }
  return 0;
}

int cmd_grad_check(const CommonArgs& args) {
  const json cfg = effective_config(args);
  const int cases = cfg.at("grad_check").at("cases").get<int>();
  const double tol = cfg.at("grad_check").at("tolerance").get<double>();
  const uint64_t seed = cfg.at("seed").get<uint64_t>();

  CorpusConfig ccfg;
  ccfg.num_utterances = 1;
  ccfg.t_min = 5;
  ccfg.t_max = 6;
  ccfg.num_bins = 8;
  ccfg.visual_dim = 3;
  ccfg.num_phones = 3;
  ccfg.labels_min = 1;
  ccfg.labels_max = 2;

  ModelConfig mcfg;
  mcfg.z_enh = 1;
  mcfg.z_asr = 1;
  mcfg.hidden = 4;
  mcfg.num_bins = ccfg.num_bins;
  mcfg.visual_dim = ccfg.visual_dim;
  mcfg.mel_channels = 4;
  mcfg.num_symbols = ccfg.num_phones + 1;

  const MelFilterbank mel =
      mel_filterbank(mcfg.mel_channels, mcfg.num_bins, 8000.0);
  bool all_ok = true;
  for (int c = 0; c < cases; ++c) {
    const Corpus corpus = synth_corpus(ccfg, Rng::derive(seed, c));
    const Utterance& utt = corpus.utterances.front();
    StdVector d = compute_std_vector(corpus);
    const ParameterStore store =
        init_params(mcfg, Arch::kJoint, Rng::derive(seed, 1000 + c));

    const auto enh_loss = [&](const ParameterStore& s) {
      const JointCache jc = joint_forward(mcfg, s, utt, mel, d, 0);
      return mse_loss(jc.enh.y, utt.clean.frames).value;
    };
    const auto asr_loss = [&](const ParameterStore& s) {
      const JointCache jc = joint_forward(mcfg, s, utt, mel, d, 0);
      return ctc_loss(jc.asr.logits, utt.labels).value;
    };
    const JointCache jc = joint_forward(mcfg, store, utt, mel, d, 0);
    const LossValue enh = mse_loss(jc.enh.y, utt.clean.frames);
    const LossValue asr = ctc_loss(jc.asr.logits, utt.labels);
    const GradStore genh =
        joint_backward(mcfg, store, mel, d, jc, &enh.grad, nullptr);
    const GradStore gasr =
        joint_backward(mcfg, store, mel, d, jc, nullptr, &asr.grad);
    const GradCheckReport re = grad_check(enh_loss, store, genh, tol);
    const GradCheckReport ra = grad_check(asr_loss, store, gasr, tol);
    const bool ok = re.passed && ra.passed;
    all_ok = all_ok && ok;
    std::printf("case %d: enh max %.3g (%s), asr max %.3g (%s) -> %s\n", c,
                re.max_rel_err, re.worst_array.c_str(), ra.max_rel_err,
                ra.worst_array.c_str(), ok ? "PASS" : "FAIL");
  }
  std::printf("grad-check: %s (tolerance %g)\n", all_ok ? "PASS" : "FAIL",
              tol);
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint audio-visual speech enhancement and phone recognition"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, check_args;
  add_common(app.add_subcommand("gen-corpus", "synthesize a corpus"),
             &gen_args);
  add_common(app.add_subcommand("train", "train a model"), &train_args);
  add_common(app.add_subcommand("eval", "score a checkpoint on a corpus"),
             &eval_args);
  add_common(app.add_subcommand("grad-check",
                                "finite-difference gradient verification"),
             &check_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_args.sub->parsed()) return cmd_gen_corpus(gen_args);
    if (train_args.sub->parsed()) return cmd_train(train_args);
    if (eval_args.sub->parsed()) return cmd_eval(eval_args);
    if (check_args.sub->parsed()) return cmd_grad_check(check_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
