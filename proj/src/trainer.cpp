#include "gpse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gpse/errors.hpp"
#include "gpse/losses.hpp"

namespace gpse {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train.learning_rate: must be > 0");
  if (ema_decay < 0.0 || ema_decay > 1.0)
    throw ConfigError("train.ema_decay: must be in [0, 1]");
  if (loss_weight_gen < 0.0 || loss_weight_pred < 0.0)
    throw ConfigError("train.loss_weights: must be >= 0");
  if (loss_weight_gen + loss_weight_pred <= 0.0)
    throw ConfigError("train.loss_weights: sum must be > 0");
  if (crop_frames < 0) throw ConfigError("train.crop_frames: must be >= 0");
  if (grad_clip <= 0.0) throw ConfigError("train.grad_clip: must be > 0");
}

OptimizerState OptimizerState::init(const ScoreModel& model) {
  OptimizerState s;
  for (const auto& p : model.parameters()) {
    s.m.push_back(Tensor::zeros(p.var.value().shape));
    s.v.push_back(Tensor::zeros(p.var.value().shape));
  }
  return s;
}

void adam_update(OptimizerState& opt, ScoreModel& model, double lr) {
  auto& params = model.parameters();
  if (opt.m.size() != params.size())
    throw ConfigError("adam_update: optimizer state does not match model");
  opt.step += 1;
  double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto& value = params[i].var.value();
    auto& grad = params[i].var.grad();
    auto& m = opt.m[i];
    auto& v = opt.v[i];
    for (size_t j = 0; j < value.size(); ++j) {
      double g = grad.data[j];
      m.data[j] = opt.beta1 * m.data[j] + (1.0 - opt.beta1) * g;
      v.data[j] = opt.beta2 * v.data[j] + (1.0 - opt.beta2) * g * g;
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      value.data[j] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

EmaState EmaState::init(const ScoreModel& model) {
  EmaState s;
  for (const auto& p : model.parameters()) s.shadow.push_back(p.var.value());
  return s;
}

void ema_update(EmaState& ema, const ScoreModel& model, double decay) {
  const auto& params = model.parameters();
  if (ema.shadow.size() != params.size())
    throw ConfigError("ema_update: state does not match model");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& value = params[i].var.value();
    auto& sh = ema.shadow[i];
    for (size_t j = 0; j < value.size(); ++j)
      sh.data[j] = decay * sh.data[j] + (1.0 - decay) * value.data[j];
  }
}

void swap_to_ema(ScoreModel& model, EmaState& ema) {
  auto& params = model.parameters();
  if (ema.shadow.size() != params.size())
    throw ConfigError("swap_to_ema: state does not match model");
  for (size_t i = 0; i < params.size(); ++i)
    std::swap(params[i].var.value().data, ema.shadow[i].data);
}

namespace {

double clip_gradients(ScoreModel& model, double max_norm) {
  double norm_sq = 0.0;
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    for (double g : p.var.grad().data) norm_sq += g * g;
  }
  double norm = std::sqrt(norm_sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto& p : model.parameters()) {
      if (!p.trainable) continue;
      for (double& g : p.var.grad().data) g *= scale;
    }
  }
  return norm;
}

}  // namespace

LossRecord training_step(ScoreModel& model, const std::vector<const SpecPair*>& batch,
                         const TrainConfig& cfg, Rng& rng, OptimizerState& opt,
                         EmaState* ema) {
  if (batch.empty()) throw ConfigError("training_step: empty batch");
  const SdeParams& sde = model.sde();

  // steps (1)-(4): per-item t, the dataset pair, z, and x_t = mu + sigma z
  std::vector<double> t(batch.size()), sigma(batch.size()), out_scale(batch.size());
  std::vector<ComplexSpec> x_t(batch.size()), z(batch.size());
  double t_sum = 0.0;
  double sd = model.config().sigma_data;
  for (size_t i = 0; i < batch.size(); ++i) {
    t[i] = rng.uniform(sde.t_eps, sde.t_max);
    t_sum += t[i];
    sigma[i] = kernel_std(t[i], sde);
    double w = std::exp(-sde.gamma * t[i]);
    out_scale[i] = std::sqrt(w * w * sd * sd + sigma[i] * sigma[i]);
    auto [xt, zi] = sample_perturbed(batch[i]->x0, batch[i]->y, t[i], sde, rng);
    x_t[i] = std::move(xt);
    z[i] = std::move(zi);
  }

  // pack the batch: input [N,4,F,B], z and x0 as [N,2,F,B]
  int frames = batch[0]->x0.frames, bins = batch[0]->x0.bins;
  Tensor input({static_cast<int>(batch.size()), 4, frames, bins});
  for (size_t n = 0; n < batch.size(); ++n)
    for (int i = 0; i < frames; ++i)
      for (int j = 0; j < bins; ++j) {
        input.at4(static_cast<int>(n), 0, i, j) = x_t[n].at(i, j).real();
        input.at4(static_cast<int>(n), 1, i, j) = x_t[n].at(i, j).imag();
        input.at4(static_cast<int>(n), 2, i, j) = batch[n]->y.at(i, j).real();
        input.at4(static_cast<int>(n), 3, i, j) = batch[n]->y.at(i, j).imag();
      }
  std::vector<const ComplexSpec*> z_ptrs, x0_ptrs;
  for (size_t i = 0; i < batch.size(); ++i) {
    z_ptrs.push_back(&z[i]);
    x0_ptrs.push_back(&batch[i]->x0);
  }

  EncodeOut enc = model.encode(Var::constant(std::move(input)), t);

  LossRecord rec;
  rec.t_mean = t_sum / static_cast<double>(batch.size());

  // descend the sigma^2-weighted objective (same optimum as the plain DSM
  // loss, O(1) per-sample gradients across the whole t range)
  Var gen_loss = dsm_loss_weighted_var(model.decode_score(enc), pack_specs(z_ptrs),
                                       sigma, out_scale);
  rec.gen = gen_loss.scalar();

  Var total = ops::scale(gen_loss, cfg.loss_weight_gen);
  bool use_pred = model.has_pred_decoder() && cfg.loss_weight_pred > 0.0;
  if (use_pred) {
    Var pred_loss = predictive_loss_var(model.decode_pred(enc), pack_specs(x0_ptrs));
    rec.pred = pred_loss.scalar();
    total = ops::add(total, ops::scale(pred_loss, cfg.loss_weight_pred));
  }
  rec.combined = total.scalar();
  if (!std::isfinite(rec.combined))
    throw NumericError("training_step: non-finite loss (gen=" + std::to_string(rec.gen) +
                       " pred=" + std::to_string(rec.pred) + ")");

  zero_grads(model);
  backward(total);
  rec.grad_norm = clip_gradients(model, cfg.grad_clip);
  adam_update(opt, model, cfg.learning_rate);
  if (ema) ema_update(*ema, model, cfg.ema_decay);
  return rec;
}

std::string train_on_pairs(ScoreModel& model, const std::vector<SpecPair>& pairs,
                           const TrainConfig& cfg, const std::string& out_dir,
                           const std::string& run_id,
                           const std::function<void(const TrainProgress&)>& on_step) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("train: no training pairs");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string log_path = out_dir + "/" + run_id + "_train_log.csv";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write training log: " + log_path);
  log << "step,t_mean,gen_loss,pred_loss,combined\n";
  log.precision(10);

  OptimizerState opt = OptimizerState::init(model);
  EmaState ema = EmaState::init(model);
  Rng step_rng = Rng(cfg.seed).split(0x7261696e);  // training noise stream

  std::string ckpt_path = out_dir + "/" + run_id + ".ckpt";
  int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic shuffle per epoch
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng(cfg.seed).split(1000 + static_cast<uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    std::vector<SpecPair> crops;  // storage for cropped views of this batch
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      crops.clear();
      std::vector<const SpecPair*> batch;
      for (size_t k = start; k < end; ++k) {
        const SpecPair& p = pairs[order[k]];
        if (cfg.crop_frames > 0 && p.x0.frames > cfg.crop_frames) {
          int max_start = p.x0.frames - cfg.crop_frames;
          int cs = static_cast<int>(shuffle_rng.below(static_cast<uint64_t>(max_start + 1)));
          SpecPair c;
          c.x0 = ComplexSpec(cfg.crop_frames, p.x0.bins);
          c.y = ComplexSpec(cfg.crop_frames, p.y.bins);
          c.x0.config = p.x0.config;
          c.y.config = p.y.config;
          c.x0.compressed = p.x0.compressed;
          c.y.compressed = p.y.compressed;
          for (int i = 0; i < cfg.crop_frames; ++i)
            for (int j = 0; j < p.x0.bins; ++j) {
              c.x0.at(i, j) = p.x0.at(cs + i, j);
              c.y.at(i, j) = p.y.at(cs + i, j);
            }
          crops.push_back(std::move(c));
        } else {
          crops.push_back(p);
        }
      }
      for (const auto& c : crops) batch.push_back(&c);

      LossRecord rec = training_step(model, batch, cfg, step_rng, opt, &ema);
      ++step;
      log << step << ',' << rec.t_mean << ',' << rec.gen << ',' << rec.pred << ','
          << rec.combined << '\n';
      if (on_step) on_step({step, epoch, rec});
    }

    // per-epoch checkpoint carries the EMA weights when EMA is active
    bool use_ema = cfg.ema_decay > 0.0;
    if (use_ema) swap_to_ema(model, ema);
    model.save_checkpoint(ckpt_path, use_ema);
    if (use_ema) swap_to_ema(model, ema);
  }
  return ckpt_path;
}

}  // namespace gpse
