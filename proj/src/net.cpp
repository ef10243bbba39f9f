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

#include "avjoint/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include <json.hpp>

#include "avjoint/bytes.hpp"
#include "avjoint/error.hpp"
#include "avjoint/kernels.hpp"
#include "avjoint/rng.hpp"

namespace avjoint {

namespace {

using nlohmann::json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string layer_prefix(const std::string& side, int z) {
  return side + ".l" + std::to_string(z) + ".";
}

LstmParamsView layer_view(const ParameterStore& store,
                          const std::string& prefix) {
  return LstmParamsView{&store.at(prefix + "wx"), &store.at(prefix + "wh"),
                        &store.at(prefix + "b")};
}

Matrix& grad_at(GradStore* grads, const std::string& name, int rows,
                int cols) {
  auto it = grads->arrays.find(name);
  if (it == grads->arrays.end()) {
    it = grads->arrays.emplace(name, Matrix(rows, cols)).first;
  } else if (it->second.rows != rows || it->second.cols != cols) {
    throw Error("gradient shape clash for " + name);
  }
  return it->second;
}

void add_lstm_shapes(std::map<std::string, std::pair<int, int>>* out,
                     const std::string& side, int layers, int input_width,
                     int hidden) {
  for (int z = 0; z < layers; ++z) {
    const int fan_in = z == 0 ? input_width : 2 * hidden;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string p = layer_prefix(side, z) + dir + ".";
      (*out)[p + "wx"] = {4 * hidden, fan_in};
      (*out)[p + "wh"] = {4 * hidden, hidden};
      (*out)[p + "b"] = {1, 4 * hidden};
    }
  }
}

/// Runs a stack of BLSTM layers named <side>.l0 .. l<layers-1>.
std::vector<BlstmCache> run_stack(const ParameterStore& store,
                                  const std::string& side, int layers,
                                  const Matrix& input) {
  std::vector<BlstmCache> caches;
  caches.reserve(static_cast<size_t>(layers));
  const Matrix* cur = &input;
  for (int z = 0; z < layers; ++z) {
    const std::string p = layer_prefix(side, z);
    caches.push_back(blstm_forward(layer_view(store, p + "fwd."),
                                   layer_view(store, p + "bwd."), *cur));
    cur = &caches.back().h;
  }
  return caches;
}

void blstm_backward(const ParameterStore& store, const std::string& prefix,
                    const Matrix& x, const BlstmCache& cache, const Matrix& dh,
                    GradStore* grads, Matrix* dx) {
  const int T = x.rows;
  const int H = cache.fwd.h.cols;
  if (dh.rows != T || dh.cols != 2 * H) {
    throw Error("blstm_backward: upstream gradient shape mismatch");
  }
  Matrix dh_f(T, H), dh_b(T, H);
  for (int t = 0; t < T; ++t) {
    std::memcpy(dh_f.row(t), dh.row(t), sizeof(double) * H);
    std::memcpy(dh_b.row(t), dh.row(t) + H, sizeof(double) * H);
  }
  const auto run = [&](const char* dir_name, Direction dir,
                       const LstmCache& side_cache, const Matrix& dh_side,
                       Matrix* dx_side) {
    const std::string p = prefix + dir_name + ".";
    const LstmParamsView v = layer_view(store, p);
    Matrix& dwx = grad_at(grads, p + "wx", v.wx->rows, v.wx->cols);
    Matrix& dwh = grad_at(grads, p + "wh", v.wh->rows, v.wh->cols);
    Matrix& db = grad_at(grads, p + "b", 1, v.b->cols);
    lstm_backward(v, x, side_cache, dir, dh_side, &dwx, &dwh, &db, dx_side);
  };
  Matrix dx_b;
  run("fwd", Direction::kForward, cache.fwd, dh_f, dx);
  run("bwd", Direction::kBackward, cache.bwd, dh_b, &dx_b);
  kernels::active().axpy(1.0, dx_b.data.data(), dx->data.data(),
                         static_cast<int>(dx->size()));
}

/// Backward through a BLSTM stack. dtop is consumed. With dinput null the
/// input gradient of layer 0 is still computed when layers > 1 but the final
/// one is dropped.
void stack_backward(const ParameterStore& store, const std::string& side,
                    int layers, const Matrix& input,
                    const std::vector<BlstmCache>& caches, Matrix dtop,
                    GradStore* grads, Matrix* dinput) {
  for (int z = layers - 1; z >= 0; --z) {
    const Matrix& x = z == 0 ? input : caches[static_cast<size_t>(z) - 1].h;
    Matrix dx;
    blstm_backward(store, layer_prefix(side, z),
                   x, caches[static_cast<size_t>(z)], dtop, grads, &dx);
    dtop = std::move(dx);
  }
  if (dinput != nullptr) *dinput = std::move(dtop);
}

const char* mode_name(AsrInputMode m) {
  switch (m) {
    case AsrInputMode::kAudio: return "audio";
    case AsrInputMode::kAudioVisual: return "audio_visual";
    case AsrInputMode::kVisual: return "visual";
  }
  return "audio";
}

AsrInputMode mode_from_name(const std::string& s) {
  if (s == "audio") return AsrInputMode::kAudio;
  if (s == "audio_visual") return AsrInputMode::kAudioVisual;
  if (s == "visual") return AsrInputMode::kVisual;
  throw FormatError("unknown asr input mode '" + s + "'");
}

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["z_enh"] = cfg.z_enh;
  j["z_asr"] = cfg.z_asr;
  j["hidden"] = cfg.hidden;
  j["num_bins"] = cfg.num_bins;
  j["visual_dim"] = cfg.visual_dim;
  j["mel_channels"] = cfg.mel_channels;
  j["num_symbols"] = cfg.num_symbols;
  j["k"] = cfg.k;
  j["asr_input_mode"] = mode_name(cfg.asr_input_mode);
  j["enh_streams"] = cfg.enh_streams;
  j["enh_uses_visual"] = cfg.enh_uses_visual;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.z_enh = j.at("z_enh").get<int>();
  cfg.z_asr = j.at("z_asr").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.num_bins = j.at("num_bins").get<int>();
  cfg.visual_dim = j.at("visual_dim").get<int>();
  cfg.mel_channels = j.at("mel_channels").get<int>();
  cfg.num_symbols = j.at("num_symbols").get<int>();
  cfg.k = j.at("k").get<double>();
  cfg.asr_input_mode = mode_from_name(j.at("asr_input_mode").get<std::string>());
  cfg.enh_streams = j.at("enh_streams").get<int>();
  cfg.enh_uses_visual = j.at("enh_uses_visual").get<bool>();
  return cfg;
}

constexpr char kCheckpointMagic[8] = {'A', 'V', 'J', 'T',
                                      'C', 'K', 'P', 'T'};
constexpr char kCheckpointFormat[] = "avjoint-checkpoint-v1";

}  // namespace

void ModelConfig::validate(Arch arch) const {
  const auto fail = [](const std::string& msg) {
    throw InvalidConfigError("model config: " + msg);
  };
  if (hidden < 1) fail("hidden must be positive");
  if (num_symbols < 2) fail("num_symbols must cover blank plus one phone");
  if (z_asr < 1) fail("z_asr must be positive");
  if (enh_streams != 1 && enh_streams != 2) fail("enh_streams must be 1 or 2");
  const bool wants_audio = arch == Arch::kJoint ||
                           asr_input_mode != AsrInputMode::kVisual;
  if (wants_audio && mel_channels < 1) fail("mel_channels must be positive");
  const bool wants_visual =
      (arch == Arch::kJoint && enh_uses_visual) ||
      (arch == Arch::kAsrOnly && asr_input_mode != AsrInputMode::kAudio);
  if (wants_visual && visual_dim < 1) fail("visual_dim must be positive");
  if (arch == Arch::kJoint) {
    if (z_enh < 1) fail("z_enh must be positive");
    if (num_bins < 1) fail("num_bins must be positive");
    if (k <= 0.0) fail("k must be positive");
    if (asr_input_mode != AsrInputMode::kAudio) {
      fail("the joint model feeds the recognizer audio only");
    }
  }
}

int asr_input_width(const ModelConfig& cfg, Arch arch) {
  if (arch == Arch::kJoint) return cfg.mel_channels;
  switch (cfg.asr_input_mode) {
    case AsrInputMode::kAudio: return cfg.mel_channels;
    case AsrInputMode::kAudioVisual: return cfg.mel_channels + cfg.visual_dim;
    case AsrInputMode::kVisual: return cfg.visual_dim;
  }
  return cfg.mel_channels;
}

int enh_input_width(const ModelConfig& cfg) {
  return cfg.num_bins + (cfg.enh_uses_visual ? cfg.visual_dim : 0);
}

Matrix& ParameterStore::at(const std::string& name) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw Error("missing array " + name);
  return it->second;
}

const Matrix& ParameterStore::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw Error("missing array " + name);
  return it->second;
}

std::map<std::string, std::pair<int, int>> param_shapes(const ModelConfig& cfg,
                                                        Arch arch) {
  cfg.validate(arch);
  std::map<std::string, std::pair<int, int>> shapes;
  if (arch == Arch::kJoint) {
    add_lstm_shapes(&shapes, "enh", cfg.z_enh, enh_input_width(cfg),
                    cfg.hidden);
    shapes["enh.head.w"] = {cfg.enh_streams * cfg.num_bins, 2 * cfg.hidden};
    shapes["enh.head.b"] = {1, cfg.enh_streams * cfg.num_bins};
  }
  add_lstm_shapes(&shapes, "asr", cfg.z_asr, asr_input_width(cfg, arch),
                  cfg.hidden);
  shapes["asr.proj.w"] = {cfg.num_symbols, 2 * cfg.hidden};
  shapes["asr.proj.b"] = {1, cfg.num_symbols};
  return shapes;
}

ParameterStore init_params(const ModelConfig& cfg, Arch arch, uint64_t seed) {
  ParameterStore store;
  const int H = cfg.hidden;
  for (const auto& [name, shape] : param_shapes(cfg, arch)) {
    Matrix m(shape.first, shape.second);
    const bool is_bias = name.size() >= 2 &&
                         name.compare(name.size() - 2, 2, ".b") == 0;
    if (is_bias) {
      // Recurrent forget gates open at first so early gradients reach back
      // through time; every other bias starts at zero.
      if (name.find(".fwd.") != std::string::npos ||
          name.find(".bwd.") != std::string::npos) {
        for (int j = H; j < 2 * H; ++j) m.data[static_cast<size_t>(j)] = 1.0;
      }
    } else {
      Rng rng(Rng::derive(seed, fnv1a(name)));
      const double a = 1.0 / std::sqrt(static_cast<double>(shape.second));
      for (double& v : m.data) v = rng.uniform(-a, a);
    }
    store.arrays.emplace(name, std::move(m));
  }
  return store;
}

LstmCache lstm_forward(const LstmParamsView& p, const Matrix& x,
                       Direction dir) {
  const int T = x.rows;
  const int F = x.cols;
  const int H = p.wh->cols;
  if (T < 1) throw InvalidInputError("lstm_forward: empty input");
  if (p.wx->rows != 4 * H || p.wx->cols != F || p.wh->rows != 4 * H ||
      p.b->rows != 1 || p.b->cols != 4 * H) {
    throw Error("lstm_forward: parameter shapes disagree with input");
  }
  LstmCache cc;
  for (Matrix* m : {&cc.i, &cc.f, &cc.g, &cc.o, &cc.c, &cc.tanh_c, &cc.h}) {
    *m = Matrix(T, H);
  }
  const auto& k = kernels::active();
  std::vector<double> z(static_cast<size_t>(4) * H);
  std::vector<double> h_prev(static_cast<size_t>(H), 0.0);
  std::vector<double> c_prev(static_cast<size_t>(H), 0.0);
  for (int s = 0; s < T; ++s) {
    const int t = dir == Direction::kForward ? s : T - 1 - s;
    const double* xt = x.row(t);
    for (int j = 0; j < F; ++j) {
      if (!std::isfinite(xt[j])) {
        throw NumericError("lstm_forward: non-finite input at frame " +
                           std::to_string(t));
      }
    }
    std::copy(p.b->data.begin(), p.b->data.end(), z.begin());
    k.matvec_acc(p.wx->data.data(), xt, z.data(), 4 * H, F);
    k.matvec_acc(p.wh->data.data(), h_prev.data(), z.data(), 4 * H, H);
    double* it = cc.i.row(t);
    double* ft = cc.f.row(t);
    double* gt = cc.g.row(t);
    double* ot = cc.o.row(t);
    double* ct = cc.c.row(t);
    double* tct = cc.tanh_c.row(t);
    double* ht = cc.h.row(t);
    for (int j = 0; j < H; ++j) {
      it[j] = sigmoid(z[static_cast<size_t>(j)]);
      ft[j] = sigmoid(z[static_cast<size_t>(H + j)]);
      gt[j] = std::tanh(z[static_cast<size_t>(2 * H + j)]);
      ot[j] = sigmoid(z[static_cast<size_t>(3 * H + j)]);
      ct[j] = ft[j] * c_prev[static_cast<size_t>(j)] + it[j] * gt[j];
      tct[j] = std::tanh(ct[j]);
      ht[j] = ot[j] * tct[j];
    }
    std::copy(ht, ht + H, h_prev.begin());
    std::copy(ct, ct + H, c_prev.begin());
  }
  return cc;
}

void lstm_backward(const LstmParamsView& p, const Matrix& x,
                   const LstmCache& cache, Direction dir, const Matrix& dh,
                   Matrix* dwx, Matrix* dwh, Matrix* db, Matrix* dx) {
  const int T = x.rows;
  const int F = x.cols;
  const int H = p.wh->cols;
  if (cache.h.rows != T || cache.h.cols != H || !dh.same_shape(cache.h)) {
    throw Error("lstm_backward: cache does not match input");
  }
  if (!dwx->same_shape(*p.wx) || !dwh->same_shape(*p.wh) ||
      !db->same_shape(*p.b)) {
    throw Error("lstm_backward: gradient shapes disagree with parameters");
  }
  *dx = Matrix(T, F);
  const auto& k = kernels::active();
  std::vector<double> dz(static_cast<size_t>(4) * H);
  std::vector<double> dh_carry(static_cast<size_t>(H), 0.0);
  std::vector<double> dc_carry(static_cast<size_t>(H), 0.0);
  // Walk processing order in reverse; state gradients flow to the previous
  // processed frame, which for the reverse direction is the later time index.
  for (int s = T - 1; s >= 0; --s) {
    const int t = dir == Direction::kForward ? s : T - 1 - s;
    const int t_prev =
        s == 0 ? -1 : (dir == Direction::kForward ? t - 1 : t + 1);
    const double* it = cache.i.row(t);
    const double* ft = cache.f.row(t);
    const double* gt = cache.g.row(t);
    const double* ot = cache.o.row(t);
    const double* tct = cache.tanh_c.row(t);
    const double* dht_up = dh.row(t);
    const double* c_prev = t_prev >= 0 ? cache.c.row(t_prev) : nullptr;
    for (int j = 0; j < H; ++j) {
      const double dht = dht_up[j] + dh_carry[static_cast<size_t>(j)];
      const double do_ = dht * tct[j];
      const double dc = dc_carry[static_cast<size_t>(j)] +
                        dht * ot[j] * (1.0 - tct[j] * tct[j]);
      const double di = dc * gt[j];
      const double df = dc * (c_prev != nullptr ? c_prev[j] : 0.0);
      const double dg = dc * it[j];
      dz[static_cast<size_t>(j)] = di * it[j] * (1.0 - it[j]);
      dz[static_cast<size_t>(H + j)] = df * ft[j] * (1.0 - ft[j]);
      dz[static_cast<size_t>(2 * H + j)] = dg * (1.0 - gt[j] * gt[j]);
      dz[static_cast<size_t>(3 * H + j)] = do_ * ot[j] * (1.0 - ot[j]);
      dc_carry[static_cast<size_t>(j)] = dc * ft[j];
    }
    k.outer_acc(dwx->data.data(), dz.data(), x.row(t), 4 * H, F);
    if (t_prev >= 0) {
      k.outer_acc(dwh->data.data(), dz.data(), cache.h.row(t_prev), 4 * H, H);
    }
    k.axpy(1.0, dz.data(), db->data.data(), 4 * H);
    k.matvec_t_acc(p.wx->data.data(), dz.data(), dx->row(t), 4 * H, F);
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    k.matvec_t_acc(p.wh->data.data(), dz.data(), dh_carry.data(), 4 * H, H);
  }
}

BlstmCache blstm_forward(const LstmParamsView& fwd, const LstmParamsView& bwd,
                         const Matrix& x) {
  BlstmCache cc;
  cc.fwd = lstm_forward(fwd, x, Direction::kForward);
  cc.bwd = lstm_forward(bwd, x, Direction::kBackward);
  const int T = x.rows;
  const int H = cc.fwd.h.cols;
  cc.h = Matrix(T, 2 * H);
  for (int t = 0; t < T; ++t) {
    std::memcpy(cc.h.row(t), cc.fwd.h.row(t), sizeof(double) * H);
    std::memcpy(cc.h.row(t) + H, cc.bwd.h.row(t), sizeof(double) * H);
  }
  return cc;
}

AsrCache asr_forward(const ModelConfig& cfg, const ParameterStore& store,
                     const Matrix& input) {
  AsrCache cc;
  cc.input = input;
  cc.layers = run_stack(store, "asr", cfg.z_asr, cc.input);
  const Matrix& top = cc.layers.back().h;
  const Matrix& w = store.at("asr.proj.w");
  const Matrix& b = store.at("asr.proj.b");
  const int T = top.rows;
  const int P = w.rows;
  cc.logits = Matrix(T, P);
  const auto& k = kernels::active();
  for (int t = 0; t < T; ++t) {
    std::memcpy(cc.logits.row(t), b.data.data(), sizeof(double) * P);
    k.matvec_acc(w.data.data(), top.row(t), cc.logits.row(t), P, w.cols);
  }
  return cc;
}

void asr_backward(const ModelConfig& cfg, const ParameterStore& store,
                  const AsrCache& cache, const Matrix& dlogits,
                  GradStore* grads, Matrix* dinput) {
  const Matrix& top = cache.layers.back().h;
  if (dlogits.rows != top.rows || dlogits.cols != cache.logits.cols) {
    throw Error("asr_backward: logits gradient shape mismatch");
  }
  const Matrix& w = store.at("asr.proj.w");
  Matrix& dw = grad_at(grads, "asr.proj.w", w.rows, w.cols);
  Matrix& db = grad_at(grads, "asr.proj.b", 1, w.rows);
  const int T = top.rows;
  Matrix dtop(T, top.cols);
  const auto& k = kernels::active();
  for (int t = 0; t < T; ++t) {
    k.outer_acc(dw.data.data(), dlogits.row(t), top.row(t), w.rows, w.cols);
    k.axpy(1.0, dlogits.row(t), db.data.data(), w.rows);
    k.matvec_t_acc(w.data.data(), dlogits.row(t), dtop.row(t), w.rows, w.cols);
  }
  stack_backward(store, "asr", cfg.z_asr, cache.input, cache.layers,
                 std::move(dtop), grads, dinput);
}

EnhCache enh_forward(const ModelConfig& cfg, const ParameterStore& store,
                     const Matrix& x, const StdVector& d) {
  if (d.size() != cfg.num_bins) {
    throw InvalidInputError("enh_forward: std vector does not match num_bins");
  }
  if (x.cols != enh_input_width(cfg)) {
    throw InvalidInputError("enh_forward: input width mismatch");
  }
  EnhCache cc;
  cc.input = x;
  cc.layers = run_stack(store, "enh", cfg.z_enh, cc.input);
  const Matrix& top = cc.layers.back().h;
  const Matrix& w = store.at("enh.head.w");
  const Matrix& b = store.at("enh.head.b");
  const int T = top.rows;
  const int SN = w.rows;  // streams * num_bins
  cc.sig = Matrix(T, SN);
  cc.y = Matrix(T, SN);
  const auto& k = kernels::active();
  std::vector<double> pre(static_cast<size_t>(SN));
  for (int t = 0; t < T; ++t) {
    std::memcpy(pre.data(), b.data.data(), sizeof(double) * SN);
    k.matvec_acc(w.data.data(), top.row(t), pre.data(), SN, w.cols);
    double* sg = cc.sig.row(t);
    double* yt = cc.y.row(t);
    for (int c = 0; c < SN; ++c) {
      sg[c] = sigmoid(pre[static_cast<size_t>(c)]);
      yt[c] = sg[c] * cfg.k * d.d[static_cast<size_t>(c % cfg.num_bins)];
    }
  }
  return cc;
}

void enh_backward(const ModelConfig& cfg, const ParameterStore& store,
                  const StdVector& d, const EnhCache& cache, const Matrix& dy,
                  GradStore* grads, Matrix* dx) {
  if (!dy.same_shape(cache.y)) {
    throw Error("enh_backward: output gradient shape mismatch");
  }
  const Matrix& top = cache.layers.back().h;
  const Matrix& w = store.at("enh.head.w");
  Matrix& dw = grad_at(grads, "enh.head.w", w.rows, w.cols);
  Matrix& db = grad_at(grads, "enh.head.b", 1, w.rows);
  const int T = top.rows;
  const int SN = w.rows;
  Matrix dtop(T, top.cols);
  const auto& k = kernels::active();
  std::vector<double> dpre(static_cast<size_t>(SN));
  for (int t = 0; t < T; ++t) {
    const double* sg = cache.sig.row(t);
    const double* dyt = dy.row(t);
    for (int c = 0; c < SN; ++c) {
      const double dsig =
          dyt[c] * cfg.k * d.d[static_cast<size_t>(c % cfg.num_bins)];
      dpre[static_cast<size_t>(c)] = dsig * sg[c] * (1.0 - sg[c]);
    }
    k.outer_acc(dw.data.data(), dpre.data(), top.row(t), SN, w.cols);
    k.axpy(1.0, dpre.data(), db.data.data(), SN);
    k.matvec_t_acc(w.data.data(), dpre.data(), dtop.row(t), SN, w.cols);
  }
  stack_backward(store, "enh", cfg.z_enh, cache.input, cache.layers,
                 std::move(dtop), grads, dx);
}

Matrix enh_input(const ModelConfig& cfg, const Utterance& utt) {
  const int T = utt.num_frames();
  const int N = cfg.num_bins;
  if (utt.mixture.num_bins() != N) {
    throw InvalidInputError("enh_input: utterance bin count mismatch");
  }
  Matrix x(T, enh_input_width(cfg));
  for (int t = 0; t < T; ++t) {
    std::memcpy(x.row(t), utt.mixture.frames.row(t), sizeof(double) * N);
    if (cfg.enh_uses_visual) {
      if (utt.visual.dim() != cfg.visual_dim || utt.visual.num_frames() != T) {
        throw InvalidInputError("enh_input: visual shape mismatch");
      }
      std::memcpy(x.row(t) + N, utt.visual.frames.row(t),
                  sizeof(double) * cfg.visual_dim);
    }
  }
  return x;
}

JointCache joint_complete(const ModelConfig& cfg, const ParameterStore& store,
                          const MelFilterbank& mel, EnhCache enh,
                          int asr_stream) {
  if (asr_stream < 0 || asr_stream >= cfg.enh_streams) {
    throw InvalidInputError("joint_complete: asr_stream out of range");
  }
  if (mel.channels() != cfg.mel_channels || mel.num_bins() != cfg.num_bins) {
    throw InvalidInputError("joint_complete: filterbank shape mismatch");
  }
  JointCache cc;
  cc.enh = std::move(enh);
  cc.asr_stream = asr_stream;
  // Warp the selected stream to mel channels; the recognizer sees only this.
  const int T = cc.enh.y.rows;
  const int N = cfg.num_bins;
  cc.asr_input = Matrix(T, cfg.mel_channels);
  const auto& k = kernels::active();
  const int off = asr_stream * N;
  for (int t = 0; t < T; ++t) {
    k.matvec(mel.weights.data.data(), cc.enh.y.row(t) + off,
             cc.asr_input.row(t), cfg.mel_channels, N);
  }
  cc.asr = asr_forward(cfg, store, cc.asr_input);
  return cc;
}

JointCache joint_forward(const ModelConfig& cfg, const ParameterStore& store,
                         const Utterance& utt, const MelFilterbank& mel,
                         const StdVector& d, int asr_stream) {
  return joint_complete(cfg, store, mel,
                        enh_forward(cfg, store, enh_input(cfg, utt), d),
                        asr_stream);
}

GradStore joint_backward(const ModelConfig& cfg, const ParameterStore& store,
                         const MelFilterbank& mel, const StdVector& d,
                         const JointCache& cache, const Matrix* dy,
                         const Matrix* dlogits) {
  GradStore grads;
  for (const auto& [name, shape] : param_shapes(cfg, Arch::kJoint)) {
    grads.arrays.emplace(name, Matrix(shape.first, shape.second));
  }
  const int T = cache.enh.y.rows;
  const int N = cfg.num_bins;
  Matrix dy_total(T, cache.enh.y.cols);
  if (dy != nullptr) {
    if (!dy->same_shape(dy_total)) {
      throw Error("joint_backward: enhancement gradient shape mismatch");
    }
    dy_total = *dy;
  }
  if (dlogits != nullptr) {
    Matrix dasr_in;
    asr_backward(cfg, store, cache.asr, *dlogits, &grads, &dasr_in);
    // Route the recognizer's input gradient back through the warp into the
    // stream it listened to: dy[t] += W^T dmel[t].
    const auto& k = kernels::active();
    const int off = cache.asr_stream * N;
    for (int t = 0; t < T; ++t) {
      k.matvec_t_acc(mel.weights.data.data(), dasr_in.row(t),
                     dy_total.row(t) + off, cfg.mel_channels, N);
    }
  }
  enh_backward(cfg, store, d, cache.enh, dy_total, &grads, nullptr);
  return grads;
}

GradCheckReport grad_check(
    const std::function<double(const ParameterStore&)>& loss_fn,
    const ParameterStore& store, const GradStore& analytic, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  ParameterStore work = store;
  for (auto& [name, m] : work.arrays) {
    const Matrix& a = analytic.at(name);
    if (!a.same_shape(m)) {
      throw Error("grad_check: analytic gradient shape mismatch for " + name);
    }
    double worst = 0.0;
    for (size_t idx = 0; idx < m.data.size(); ++idx) {
      const double orig = m.data[idx];
      const double eps = 1e-5 * (1.0 + std::abs(orig));
      m.data[idx] = orig + eps;
      const double lp = loss_fn(work);
      m.data[idx] = orig - eps;
      const double lm = loss_fn(work);
      m.data[idx] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double av = a.data[idx];
      const double rel = std::abs(av - fd) /
                         std::max({std::abs(av), std::abs(fd), 1e-2});
      worst = std::max(worst, rel);
    }
    report.per_array[name] = worst;
    if (worst >= report.max_rel_err) {
      report.max_rel_err = worst;
      report.worst_array = name;
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto shapes = param_shapes(ckpt.cfg, ckpt.arch);
  if (shapes.size() != ckpt.store.arrays.size()) {
    throw Error("checkpoint store does not match its config");
  }
  json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["arch"] = ckpt.arch == Arch::kJoint ? "joint" : "asr";
  manifest["config"] = config_to_json(ckpt.cfg);
  manifest["d"] = ckpt.d.d;
  manifest["echo"] = ckpt.echo;
  json arrays = json::array();
  std::string payload;
  for (const auto& [name, m] : ckpt.store.arrays) {
    const auto it = shapes.find(name);
    if (it == shapes.end() || it->second.first != m.rows ||
        it->second.second != m.cols) {
      throw Error("checkpoint array " + name + " does not match its config");
    }
    json a;
    a["name"] = name;
    a["rows"] = m.rows;
    a["cols"] = m.cols;
    a["partition"] = ParameterStore::is_enh(name) ? "enh" : "asr";
    arrays.push_back(a);
    for (double v : m.data) bytes::put_f64(payload, v);
  }
  manifest["arrays"] = std::move(arrays);

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string mtext = manifest.dump();
  bytes::put_u64(out, mtext.size());
  out += mtext;
  out += payload;
  bytes::write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = bytes::read_file(path);
  if (buf.size() < sizeof(kCheckpointMagic) + 8 ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) !=
          0) {
    throw FormatError(path + ": not a checkpoint file");
  }
  const uint64_t mlen = bytes::get_u64(buf, sizeof(kCheckpointMagic));
  const size_t mstart = sizeof(kCheckpointMagic) + 8;
  if (mstart + mlen > buf.size()) {
    throw FormatError(path + ": truncated manifest");
  }
  json manifest;
  try {
    manifest = json::parse(buf.substr(mstart, mlen));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad manifest: " + e.what());
  }
  Checkpoint ckpt;
  try {
    if (manifest.at("format").get<std::string>() != kCheckpointFormat) {
      throw FormatError(path + ": unsupported format tag");
    }
    const std::string arch = manifest.at("arch").get<std::string>();
    if (arch == "joint") {
      ckpt.arch = Arch::kJoint;
    } else if (arch == "asr") {
      ckpt.arch = Arch::kAsrOnly;
    } else {
      throw FormatError(path + ": unknown arch '" + arch + "'");
    }
    ckpt.cfg = config_from_json(manifest.at("config"));
    ckpt.d.d = manifest.at("d").get<std::vector<double>>();
    ckpt.echo = manifest.value("echo", std::string());

    const auto shapes = param_shapes(ckpt.cfg, ckpt.arch);
    const json& arrays = manifest.at("arrays");
    if (arrays.size() != shapes.size()) {
      throw FormatError(path + ": array list does not match the config");
    }
    size_t off = mstart + mlen;
    for (const json& a : arrays) {
      const std::string name = a.at("name").get<std::string>();
      const int rows = a.at("rows").get<int>();
      const int cols = a.at("cols").get<int>();
      const auto it = shapes.find(name);
      if (it == shapes.end()) {
        throw FormatError(path + ": unexpected array " + name);
      }
      if (it->second.first != rows || it->second.second != cols) {
        throw FormatError(path + ": wrong shape for " + name);
      }
      if (ckpt.store.arrays.count(name) != 0) {
        throw FormatError(path + ": duplicate array " + name);
      }
      Matrix m(rows, cols);
      const size_t need = m.data.size() * 8;
      if (off + need > buf.size()) {
        throw FormatError(path + ": truncated payload at " + name);
      }
      for (size_t idx = 0; idx < m.data.size(); ++idx) {
        m.data[idx] = bytes::get_f64(buf, off + idx * 8);
      }
      off += need;
      ckpt.store.arrays.emplace(name, std::move(m));
    }
    if (off != buf.size()) {
      throw FormatError(path + ": trailing bytes after payload");
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad manifest: " + e.what());
  }
  if (ckpt.arch == Arch::kJoint &&
      ckpt.d.size() != ckpt.cfg.num_bins) {
    throw FormatError(path + ": std vector does not match num_bins");
  }
  return ckpt;
}

}  // namespace avjoint
