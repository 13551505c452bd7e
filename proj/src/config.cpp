#include "gpse/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gpse/errors.hpp"

namespace gpse {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected number, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected boolean, got '" + v + "'");
}

std::vector<NoiseKind> to_noise_kinds(const std::string& key, const std::string& v) {
  std::vector<NoiseKind> kinds;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      kinds.push_back(noise_kind_from_string(item));
    } catch (const ConfigError&) {
      throw ConfigError(key + ": unknown noise kind '" + item + "'");
    }
  }
  if (kinds.empty()) throw ConfigError(key + ": empty list");
  return kinds;
}

std::string noise_kinds_str(const std::vector<NoiseKind>& kinds) {
  std::string s;
  for (size_t i = 0; i < kinds.size(); ++i) {
    if (i) s += ",";
    s += to_string(kinds[i]);
  }
  return s;
}

}  // namespace

RunConfig RunConfig::defaults_with_env() {
  RunConfig cfg;
  if (const char* env = std::getenv("GPSE_OUTPUT_DIR"); env && *env)
    cfg.output_dir = env;
  return cfg;
}

void RunConfig::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));

  if (key == "data.n_train") data.n_train = to_int(key, value);
  else if (key == "data.n_test") data.n_test = to_int(key, value);
  else if (key == "data.duration_s") data.duration_s = to_double(key, value);
  else if (key == "data.sample_rate") data.sample_rate = to_int(key, value);
  else if (key == "data.snr_min_db") data.snr_min_db = to_double(key, value);
  else if (key == "data.snr_max_db") data.snr_max_db = to_double(key, value);
  else if (key == "data.noise_kinds") data.noise_kinds = to_noise_kinds(key, value);
  else if (key == "data.seed") data.seed = to_u64(key, value);
  else if (key == "stft.window_len") features.stft.window_len = to_int(key, value);
  else if (key == "stft.hop") features.stft.hop = to_int(key, value);
  else if (key == "stft.fft_len") features.stft.fft_len = to_int(key, value);
  else if (key == "stft.compress") features.compress_enabled = to_bool(key, value);
  else if (key == "stft.comp_exponent") features.comp_exponent = to_double(key, value);
  else if (key == "stft.comp_scale") features.comp_scale = to_double(key, value);
  else if (key == "sde.gamma") sde.gamma = to_double(key, value);
  else if (key == "sde.sigma_min") sde.sigma_min = to_double(key, value);
  else if (key == "sde.sigma_max") sde.sigma_max = to_double(key, value);
  else if (key == "sde.t_eps") sde.t_eps = to_double(key, value);
  else if (key == "sde.t_max") sde.t_max = to_double(key, value);
  else if (key == "network.base_channels") network.base_channels = to_int(key, value);
  else if (key == "network.depth") network.depth = to_int(key, value);
  else if (key == "network.time_embed_dim") network.time_embed_dim = to_int(key, value);
  else if (key == "network.variant") network.variant = model_variant_from_string(value);
  else if (key == "network.sigma_data") network.sigma_data = to_double(key, value);
  else if (key == "train.epochs") train.epochs = to_int(key, value);
  else if (key == "train.batch_size") train.batch_size = to_int(key, value);
  else if (key == "train.learning_rate") train.learning_rate = to_double(key, value);
  else if (key == "train.ema_decay") train.ema_decay = to_double(key, value);
  else if (key == "train.loss_weight_gen") train.loss_weight_gen = to_double(key, value);
  else if (key == "train.loss_weight_pred") train.loss_weight_pred = to_double(key, value);
  else if (key == "train.seed") train.seed = to_u64(key, value);
  else if (key == "train.crop_frames") train.crop_frames = to_int(key, value);
  else if (key == "train.grad_clip") train.grad_clip = to_double(key, value);
  else if (key == "sampler.n_steps") sampler.n_steps = to_int(key, value);
  else if (key == "sampler.variant") sampler.variant = sampler_variant_from_string(value);
  else if (key == "sampler.alpha") sampler.alpha = to_double(key, value);
  else if (key == "sampler.beta") sampler.beta = to_double(key, value);
  else if (key == "sampler.corrector_steps") sampler.corrector_steps = to_int(key, value);
  else if (key == "sampler.corrector_snr") sampler.corrector_snr = to_double(key, value);
  else if (key == "sampler.seed") sampler.seed = to_u64(key, value);
  else if (key == "run.output_dir") output_dir = value;
  else if (key == "run.run_id") run_id = value;
  else if (key == "run.jobs") jobs = to_int(key, value);
  else throw ConfigError("unknown config key: " + key);
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg = defaults_with_env();
  std::string line, section;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": key outside a [section]");
    cfg.apply_override(section + "." + key + "=" + value);
  }
  return cfg;
}

void RunConfig::validate() const {
  data.validate();
  features.stft.validate();
  sde.validate();
  network.validate();
  train.validate();
  sampler.validate();
  if (jobs < 1) throw ConfigError("run.jobs: must be >= 1");

  int bins = features.stft.bins();
  int unit = 1 << network.depth;
  if (bins % unit != 0)
    throw ConfigError("stft.fft_len/network.depth: spectrogram bins (" +
                      std::to_string(bins) + ") must be divisible by 2^depth (" +
                      std::to_string(unit) + ")");
  int samples = static_cast<int>(data.duration_s * data.sample_rate);
  if (samples < features.stft.window_len)
    throw ConfigError("data.duration_s/stft.window_len: utterances shorter than one window");
  if (variant_needs_pred_decoder(sampler.variant) &&
      network.variant != ModelVariant::Gp)
    throw ConfigError("sampler.variant/network.variant: fusion variants need a GP model");
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os.precision(12);
  os << "[data]\n"
     << "n_train = " << data.n_train << "\n"
     << "n_test = " << data.n_test << "\n"
     << "duration_s = " << data.duration_s << "\n"
     << "sample_rate = " << data.sample_rate << "\n"
     << "snr_min_db = " << data.snr_min_db << "\n"
     << "snr_max_db = " << data.snr_max_db << "\n"
     << "noise_kinds = " << noise_kinds_str(data.noise_kinds) << "\n"
     << "seed = " << data.seed << "\n"
     << "[stft]\n"
     << "window_len = " << features.stft.window_len << "\n"
     << "hop = " << features.stft.hop << "\n"
     << "fft_len = " << features.stft.fft_len << "\n"
     << "compress = " << (features.compress_enabled ? "true" : "false") << "\n"
     << "comp_exponent = " << features.comp_exponent << "\n"
     << "comp_scale = " << features.comp_scale << "\n"
     << "[sde]\n"
     << "gamma = " << sde.gamma << "\n"
     << "sigma_min = " << sde.sigma_min << "\n"
     << "sigma_max = " << sde.sigma_max << "\n"
     << "t_eps = " << sde.t_eps << "\n"
     << "t_max = " << sde.t_max << "\n"
     << "[network]\n"
     << "base_channels = " << network.base_channels << "\n"
     << "depth = " << network.depth << "\n"
     << "time_embed_dim = " << network.time_embed_dim << "\n"
     << "variant = " << to_string(network.variant) << "\n"
     << "sigma_data = " << network.sigma_data << "\n"
     << "[train]\n"
     << "epochs = " << train.epochs << "\n"
     << "batch_size = " << train.batch_size << "\n"
     << "learning_rate = " << train.learning_rate << "\n"
     << "ema_decay = " << train.ema_decay << "\n"
     << "loss_weight_gen = " << train.loss_weight_gen << "\n"
     << "loss_weight_pred = " << train.loss_weight_pred << "\n"
     << "seed = " << train.seed << "\n"
     << "crop_frames = " << train.crop_frames << "\n"
     << "grad_clip = " << train.grad_clip << "\n"
     << "[sampler]\n"
     << "n_steps = " << sampler.n_steps << "\n"
     << "variant = " << to_string(sampler.variant) << "\n"
     << "alpha = " << sampler.alpha << "\n"
     << "beta = " << sampler.beta << "\n"
     << "corrector_steps = " << sampler.corrector_steps << "\n"
     << "corrector_snr = " << sampler.corrector_snr << "\n"
     << "seed = " << sampler.seed << "\n"
     << "[run]\n"
     << "output_dir = " << output_dir << "\n"
     << "run_id = " << run_id << "\n"
     << "jobs = " << jobs << "\n";
  return os.str();
}

}  // namespace gpse
