#include "gpse/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "gpse/errors.hpp"
#include "gpse/rng.hpp"

namespace gpse {

namespace {

constexpr int kFourierDim = 32;  // 16 frequencies, sin+cos
constexpr char kMagic[8] = {'G', 'P', 'S', 'E', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

int norm_groups(int channels) {
  // at least 4 channels per group so statistics stay meaningful even on
  // degenerate 1x1 grids
  int g = std::max(1, std::min(8, channels / 4));
  while (channels % g != 0) --g;
  return g;
}

int padded_dim(int d, int depth) {
  // size-1 axes flow through every level unchanged (stride-2 conv keeps 1,
  // the decoder crops after upsampling), so degenerate grids skip padding
  if (d == 1) return 1;
  int unit = 1 << depth;
  int p = ((d + unit - 1) / unit) * unit;
  return std::max(unit, p);
}

}  // namespace

std::string to_string(ModelVariant v) {
  return v == ModelVariant::Gp ? "gp" : "sgmse+";
}

ModelVariant model_variant_from_string(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(c)));
  if (l == "gp") return ModelVariant::Gp;
  if (l == "sgmse+" || l == "sgmse") return ModelVariant::SgmsePlus;
  throw ConfigError("unknown model variant: " + s);
}

void NetworkConfig::validate() const {
  if (base_channels < 2) throw ConfigError("network.base_channels: must be >= 2");
  if (depth < 2) throw ConfigError("network.depth: must be >= 2");
  if (time_embed_dim < 4) throw ConfigError("network.time_embed_dim: must be >= 4");
  if (sigma_data < 0.0) throw ConfigError("network.sigma_data: must be >= 0");
}

// ---------------------------------------------------------------------------
// layers

namespace {

struct Conv {
  Var w, b;
  int stride = 1, pad = 1;
  Var operator()(const Var& x) const { return ops::conv2d(x, w, b, stride, pad); }
};

struct Dense {
  Var w, b;
  Var operator()(const Var& x) const { return ops::linear(x, w, b); }
};

struct Norm {
  Var gamma, beta;
  int groups = 1;
  Var operator()(const Var& x) const {
    return ops::group_norm(x, gamma, beta, groups);
  }
};

struct ResBlock {
  Norm gn1;
  Conv c1;        // in -> out
  Dense t_scale;  // temb -> per-channel scale
  Dense t_shift;  // temb -> per-channel shift
  Norm gn2;
  Conv c2;  // out -> out
  Conv skip;
  bool project_skip = false;

  Var operator()(const Var& x, const Var& temb) const {
    Var h = c1(ops::silu(gn1(x)));
    // time conditioning must be able to rescale features, not only shift
    // them: the score target carries a 1/sigma(t) input scale
    h = ops::channel_film(gn2(h), t_scale(temb), t_shift(temb));
    h = c2(ops::silu(h));
    Var xs = project_skip ? skip(x) : x;
    return ops::add(xs, h);
  }
};

struct DecoderArm {
  std::vector<Conv> up_convs;    // one per level, deepest first
  std::vector<ResBlock> blocks;  // two per level, deepest first
  Norm head_norm;
  Conv head;  // -> 2 channels, zero-initialized
};

}  // namespace

struct ScoreModel::Impl {
  Var fourier_w;  // [16] fixed frequencies
  Dense t_mlp1, t_mlp2;
  Conv stem;
  std::vector<ResBlock> enc_blocks;  // two per level
  std::vector<Conv> down_convs;      // one per level
  ResBlock mid1, mid2;
  DecoderArm gen;
  DecoderArm pred;
  std::vector<int> level_channels;  // size depth
};

namespace {

class Builder {
 public:
  Builder(std::vector<Parameter>& params, Rng& rng) : params_(params), rng_(rng) {}

  Var leaf(const std::string& name, Tensor t, bool trainable) {
    Var v = Var::leaf(std::move(t), true);
    params_.push_back({name, v, trainable});
    return v;
  }

  Conv conv(const std::string& name, int cin, int cout, int k, int stride, int pad,
            bool zero_init = false) {
    double stddev =
        zero_init ? 0.0 : 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
    Conv c;
    c.w = leaf(name + ".w", Tensor::randn({cout, cin, k, k}, rng_, stddev), true);
    c.b = leaf(name + ".b", Tensor::zeros({cout}), true);
    c.stride = stride;
    c.pad = pad;
    return c;
  }

  Dense dense(const std::string& name, int din, int dout) {
    Dense d;
    d.w = leaf(name + ".w",
               Tensor::randn({dout, din}, rng_,
                             1.0 / std::sqrt(static_cast<double>(din))),
               true);
    d.b = leaf(name + ".b", Tensor::zeros({dout}), true);
    return d;
  }

  Norm norm(const std::string& name, int channels) {
    Norm n;
    n.gamma = leaf(name + ".gamma", Tensor::full({channels}, 1.0), true);
    n.beta = leaf(name + ".beta", Tensor::zeros({channels}), true);
    n.groups = norm_groups(channels);
    return n;
  }

  ResBlock res_block(const std::string& name, int cin, int cout, int temb_dim) {
    ResBlock rb;
    rb.gn1 = norm(name + ".gn1", cin);
    rb.c1 = conv(name + ".c1", cin, cout, 3, 1, 1);
    rb.t_scale = dense(name + ".temb_s", temb_dim, cout);
    rb.t_shift = dense(name + ".temb_b", temb_dim, cout);
    rb.gn2 = norm(name + ".gn2", cout);
    rb.c2 = conv(name + ".c2", cout, cout, 3, 1, 1);
    if (cin != cout) {
      rb.skip = conv(name + ".skip", cin, cout, 1, 1, 0);
      rb.project_skip = true;
    }
    return rb;
  }

  DecoderArm decoder(const std::string& name, const std::vector<int>& ch,
                     int temb_dim) {
    DecoderArm arm;
    int depth = static_cast<int>(ch.size());
    for (int l = depth - 1; l >= 0; --l) {
      int c_prev = (l == depth - 1) ? ch[l] : ch[l + 1];
      arm.up_convs.push_back(
          conv(name + ".up" + std::to_string(l), c_prev, ch[l], 3, 1, 1));
      arm.blocks.push_back(res_block(name + ".rb" + std::to_string(l) + "a",
                                     2 * ch[l], ch[l], temb_dim));
      arm.blocks.push_back(res_block(name + ".rb" + std::to_string(l) + "b",
                                     ch[l], ch[l], temb_dim));
    }
    arm.head_norm = norm(name + ".head_gn", ch[0]);
    arm.head = conv(name + ".head", ch[0], 2, 3, 1, 1, /*zero_init=*/true);
    return arm;
  }

 private:
  std::vector<Parameter>& params_;
  Rng& rng_;
};

}  // namespace

ScoreModel::ScoreModel(NetworkConfig cfg, SdeParams sde, FeatureConfig features,
                       uint64_t seed)
    : cfg_(cfg), sde_(sde), features_(features) {
  cfg_.validate();
  sde_.validate();
  build(seed);
}

void ScoreModel::build(uint64_t seed) {
  Rng rng(seed);
  Builder b(params_, rng);
  impl_ = std::make_shared<Impl>();

  impl_->fourier_w =
      b.leaf("time.fourier_w", Tensor::randn({kFourierDim / 2}, rng, 16.0),
             /*trainable=*/false);
  impl_->t_mlp1 = b.dense("time.mlp1", kFourierDim, cfg_.time_embed_dim);
  impl_->t_mlp2 = b.dense("time.mlp2", cfg_.time_embed_dim, cfg_.time_embed_dim);

  for (int l = 0; l < cfg_.depth; ++l)
    impl_->level_channels.push_back(cfg_.base_channels << l);
  const auto& ch = impl_->level_channels;

  impl_->stem = b.conv("enc.stem", 4, ch[0], 3, 1, 1);
  for (int l = 0; l < cfg_.depth; ++l) {
    impl_->enc_blocks.push_back(b.res_block("enc.rb" + std::to_string(l) + "a",
                                            ch[l], ch[l], cfg_.time_embed_dim));
    impl_->enc_blocks.push_back(b.res_block("enc.rb" + std::to_string(l) + "b",
                                            ch[l], ch[l], cfg_.time_embed_dim));
    int cout = (l + 1 < cfg_.depth) ? ch[l + 1] : ch[l];
    impl_->down_convs.push_back(
        b.conv("enc.down" + std::to_string(l), ch[l], cout, 3, 2, 1));
  }
  int cb = ch.back();
  impl_->mid1 = b.res_block("mid.rb1", cb, cb, cfg_.time_embed_dim);
  impl_->mid2 = b.res_block("mid.rb2", cb, cb, cfg_.time_embed_dim);

  impl_->gen = b.decoder("gen", ch, cfg_.time_embed_dim);
  if (cfg_.variant == ModelVariant::Gp)
    impl_->pred = b.decoder("pred", ch, cfg_.time_embed_dim);
}

EncodeOut ScoreModel::encode(const Var& input, const std::vector<double>& t) const {
  const Tensor& x = input.value();
  if (x.ndim() != 4 || x.dim(1) != 4)
    throw ConfigError("encode: input must be [N,4,H,W]");
  int n = x.dim(0);
  if (static_cast<int>(t.size()) != n)
    throw ConfigError("encode: one t per batch item required");
  for (double tv : t)
    if (tv < sde_.t_eps - 1e-9 || tv > sde_.t_max + 1e-9)
      throw ConfigError("encode: t outside [t_eps, T]");
  if (!x.all_finite()) throw NumericError("encode: non-finite input");

  EncodeOut enc;
  enc.orig_h = x.dim(2);
  enc.orig_w = x.dim(3);
  for (double tv : t) {
    double s = kernel_std(tv, sde_);
    double w = std::exp(-sde_.gamma * tv);
    enc.out_scale_inv.push_back(
        1.0 / std::sqrt(w * w * cfg_.sigma_data * cfg_.sigma_data + s * s));
  }

  // Gaussian Fourier features of t -> small MLP
  Tensor ft({n, kFourierDim});
  const auto& fw = impl_->fourier_w.value();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kFourierDim / 2; ++j) {
      double arg = 2.0 * std::numbers::pi * fw.data[j] * t[static_cast<size_t>(i)];
      ft.data[static_cast<size_t>(i) * kFourierDim + j] = std::sin(arg);
      ft.data[static_cast<size_t>(i) * kFourierDim + kFourierDim / 2 + j] =
          std::cos(arg);
    }
  }
  Var temb = impl_->t_mlp2(ops::silu(impl_->t_mlp1(Var::constant(std::move(ft)))));
  enc.temb = temb;

  int ph = padded_dim(enc.orig_h, cfg_.depth);
  int pw = padded_dim(enc.orig_w, cfg_.depth);
  Var h = ops::pad_hw(input, ph, pw);

  h = impl_->stem(h);
  for (int l = 0; l < cfg_.depth; ++l) {
    h = impl_->enc_blocks[static_cast<size_t>(2 * l)](h, temb);
    h = impl_->enc_blocks[static_cast<size_t>(2 * l + 1)](h, temb);
    enc.skips.push_back(h);
    h = impl_->down_convs[static_cast<size_t>(l)](h);
  }
  h = impl_->mid1(h, temb);
  h = impl_->mid2(h, temb);
  enc.bottleneck = h;
  return enc;
}

namespace {

Var run_decoder(const DecoderArm& arm, const EncodeOut& enc, int depth) {
  Var h = enc.bottleneck;
  for (int i = 0; i < depth; ++i) {
    int level = depth - 1 - i;
    const Var& skip = enc.skips[static_cast<size_t>(level)];
    h = ops::upsample_nearest2(h);
    h = ops::crop_hw(h, skip.value().dim(2), skip.value().dim(3));
    h = arm.up_convs[static_cast<size_t>(i)](h);
    h = ops::concat_channels(h, skip);
    h = arm.blocks[static_cast<size_t>(2 * i)](h, enc.temb);
    h = arm.blocks[static_cast<size_t>(2 * i + 1)](h, enc.temb);
  }
  h = arm.head(ops::silu(arm.head_norm(h)));
  return ops::crop_hw(h, enc.orig_h, enc.orig_w);
}

}  // namespace

Var ScoreModel::decode_score(const EncodeOut& enc) const {
  Var out = run_decoder(impl_->gen, enc, cfg_.depth);
  // The raw head regresses O(1) targets; the output gain turns that into a
  // score. Zero-initialized head keeps the untrained score exactly zero.
  return ops::row_scale(out, enc.out_scale_inv);
}

Var ScoreModel::decode_pred(const EncodeOut& enc) const {
  if (cfg_.variant != ModelVariant::Gp)
    throw ConfigError("decode_pred: model variant has no predictive decoder");
  return run_decoder(impl_->pred, enc, cfg_.depth);
}

EncodeOut ScoreModel::encode_pair(const ComplexSpec& x_t, const ComplexSpec& y,
                                  double t) const {
  if (!x_t.same_shape(y)) throw ConfigError("encode: x_t and y shape mismatch");
  return encode(Var::constant(pack_pair(x_t, y)), {t});
}

ComplexSpec ScoreModel::score(const ComplexSpec& x_t, const ComplexSpec& y,
                              double t) const {
  NoGradGuard ng;
  EncodeOut enc = encode_pair(x_t, y, t);
  Var out = decode_score(enc);
  ComplexSpec s = unpack_complex(out.value(), 0, x_t.frames, x_t.bins);
  s.config = x_t.config;
  s.compressed = x_t.compressed;
  return s;
}

ComplexSpec ScoreModel::predict(const ComplexSpec& x_t, const ComplexSpec& y,
                                double t) const {
  NoGradGuard ng;
  EncodeOut enc = encode_pair(x_t, y, t);
  Var out = decode_pred(enc);
  ComplexSpec s = unpack_complex(out.value(), 0, x_t.frames, x_t.bins);
  s.config = x_t.config;
  s.compressed = x_t.compressed;
  return s;
}

size_t ScoreModel::param_scalar_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

size_t ScoreModel::decoder_param_scalar_count(bool pred) const {
  const char* prefix = pred ? "pred." : "gen.";
  size_t n = 0;
  for (const auto& p : params_)
    if (p.name.rfind(prefix, 0) == 0) n += p.var.value().size();
  return n;
}

void zero_grads(ScoreModel& model) {
  for (auto& p : model.parameters()) {
    auto& g = p.var.grad();
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
}

Tensor pack_pair(const ComplexSpec& x_t, const ComplexSpec& y) {
  if (!x_t.same_shape(y)) throw ConfigError("pack_pair: shape mismatch");
  int f = x_t.frames, bins = x_t.bins;
  Tensor t({1, 4, f, bins});
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < bins; ++j) {
      t.at4(0, 0, i, j) = x_t.at(i, j).real();
      t.at4(0, 1, i, j) = x_t.at(i, j).imag();
      t.at4(0, 2, i, j) = y.at(i, j).real();
      t.at4(0, 3, i, j) = y.at(i, j).imag();
    }
  return t;
}

ComplexSpec unpack_complex(const Tensor& out, int n, int frames, int bins) {
  if (out.ndim() != 4 || out.dim(1) != 2 || out.dim(2) != frames ||
      out.dim(3) != bins)
    throw ConfigError("unpack_complex: unexpected tensor shape");
  ComplexSpec s(frames, bins);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < bins; ++j)
      s.at(i, j) = {out.at4(n, 0, i, j), out.at4(n, 1, i, j)};
  return s;
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw IoError("checkpoint: unexpected end of file");
}

struct CheckpointHeader {
  uint32_t flags = 0;
  NetworkConfig net;
  SdeParams sde;
  FeatureConfig feat;
};

void write_header(std::ofstream& f, const CheckpointHeader& h) {
  f.write(kMagic, 8);
  write_pod(f, kVersion);
  write_pod(f, h.flags);
  write_pod(f, static_cast<int32_t>(h.net.base_channels));
  write_pod(f, static_cast<int32_t>(h.net.depth));
  write_pod(f, static_cast<int32_t>(h.net.time_embed_dim));
  write_pod(f, static_cast<uint8_t>(h.net.variant == ModelVariant::Gp ? 1 : 0));
  write_pod(f, h.net.sigma_data);
  write_pod(f, h.sde.gamma);
  write_pod(f, h.sde.sigma_min);
  write_pod(f, h.sde.sigma_max);
  write_pod(f, h.sde.t_eps);
  write_pod(f, h.sde.t_max);
  write_pod(f, static_cast<int32_t>(h.feat.stft.window_len));
  write_pod(f, static_cast<int32_t>(h.feat.stft.hop));
  write_pod(f, static_cast<int32_t>(h.feat.stft.fft_len));
  write_pod(f, static_cast<uint8_t>(h.feat.compress_enabled ? 1 : 0));
  write_pod(f, h.feat.comp_exponent);
  write_pod(f, h.feat.comp_scale);
}

CheckpointHeader read_header(std::ifstream& f, const std::string& path) {
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = 0;
  read_pod(f, version);
  if (version != kVersion) throw IoError("unsupported checkpoint version");
  CheckpointHeader h;
  read_pod(f, h.flags);
  int32_t v32;
  uint8_t v8;
  read_pod(f, v32);
  h.net.base_channels = v32;
  read_pod(f, v32);
  h.net.depth = v32;
  read_pod(f, v32);
  h.net.time_embed_dim = v32;
  read_pod(f, v8);
  h.net.variant = v8 ? ModelVariant::Gp : ModelVariant::SgmsePlus;
  read_pod(f, h.net.sigma_data);
  read_pod(f, h.sde.gamma);
  read_pod(f, h.sde.sigma_min);
  read_pod(f, h.sde.sigma_max);
  read_pod(f, h.sde.t_eps);
  read_pod(f, h.sde.t_max);
  read_pod(f, v32);
  h.feat.stft.window_len = v32;
  read_pod(f, v32);
  h.feat.stft.hop = v32;
  read_pod(f, v32);
  h.feat.stft.fft_len = v32;
  read_pod(f, v8);
  h.feat.compress_enabled = v8 != 0;
  read_pod(f, h.feat.comp_exponent);
  read_pod(f, h.feat.comp_scale);
  return h;
}

}  // namespace

void ScoreModel::save_checkpoint(const std::string& path, bool params_are_ema) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  CheckpointHeader h{params_are_ema ? 1u : 0u, cfg_, sde_, features_};
  write_header(f, h);
  uint64_t total = param_scalar_count();
  write_pod(f, total);
  for (const auto& p : params_)
    f.write(reinterpret_cast<const char*>(p.var.value().data.data()),
            static_cast<std::streamsize>(p.var.value().size() * sizeof(double)));
  if (!f) throw IoError("checkpoint write failed: " + path);
}

ScoreModel ScoreModel::load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  CheckpointHeader h = read_header(f, path);
  ScoreModel model(h.net, h.sde, h.feat, /*seed=*/0);
  uint64_t total = 0;
  read_pod(f, total);
  if (total != model.param_scalar_count())
    throw IoError("checkpoint: parameter count mismatch");
  for (auto& p : model.params_) {
    f.read(reinterpret_cast<char*>(p.var.value().data.data()),
           static_cast<std::streamsize>(p.var.value().size() * sizeof(double)));
    if (!f) throw IoError("checkpoint: truncated parameter data");
  }
  return model;
}

bool ScoreModel::checkpoint_is_ema(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  CheckpointHeader h = read_header(f, path);
  return (h.flags & 1u) != 0;
}

double finite_diff_check(ScoreModel& model,
                         const std::function<Var()>& loss_builder,
                         double epsilon, int n_coords, Rng& rng) {
  zero_grads(model);
  Var loss = loss_builder();
  backward(loss);

  std::vector<size_t> trainable;
  for (size_t i = 0; i < model.parameters().size(); ++i)
    if (model.parameters()[i].trainable) trainable.push_back(i);

  double max_rel = 0.0;
  for (int k = 0; k < n_coords; ++k) {
    size_t pi = trainable[rng.below(trainable.size())];
    size_t fi = rng.below(model.parameters()[pi].var.value().size());
    auto& p = model.parameters()[pi];
    double saved = p.var.value().data[fi];
    double g_ad = p.var.grad().data[fi];

    NoGradGuard ng;
    p.var.value().data[fi] = saved + epsilon;
    double lp = loss_builder().scalar();
    p.var.value().data[fi] = saved - epsilon;
    double lm = loss_builder().scalar();
    p.var.value().data[fi] = saved;

    double g_fd = (lp - lm) / (2.0 * epsilon);
    double rel =
        std::fabs(g_fd - g_ad) / std::max({1.0, std::fabs(g_fd), std::fabs(g_ad)});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace gpse
