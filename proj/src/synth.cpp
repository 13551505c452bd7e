#include "gpse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "gpse/errors.hpp"
#include "gpse/fft.hpp"

namespace gpse {

namespace fs = std::filesystem;

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::White: return "white";
    case NoiseKind::Pink: return "pink";
    case NoiseKind::Modulated: return "modulated";
  }
  return "?";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "white") return NoiseKind::White;
  if (s == "pink") return NoiseKind::Pink;
  if (s == "modulated" || s == "amplitude-modulated") return NoiseKind::Modulated;
  throw ConfigError("unknown noise kind: " + s);
}

void DataConfig::validate() const {
  if (n_train < 1 || n_test < 1) throw ConfigError("data.n_train/n_test: must be >= 1");
  if (duration_s < 0.5) throw ConfigError("data.duration_s: must be >= 0.5");
  if (sample_rate <= 0) throw ConfigError("data.sample_rate: must be > 0");
  if (snr_min_db > snr_max_db) throw ConfigError("data.snr range: min > max");
  if (noise_kinds.empty()) throw ConfigError("data.noise_kinds: empty");
}

Waveform gen_clean(Rng& rng, const DataConfig& cfg) {
  cfg.validate();
  int n = static_cast<int>(std::lround(cfg.duration_s * cfg.sample_rate));
  double fs = cfg.sample_rate;

  double f0 = rng.uniform(80.0, 300.0);
  int n_harm = 3 + static_cast<int>(rng.below(6));  // 3..8
  double drift_rate = rng.uniform(0.1, 0.6);        // Hz
  double drift_depth = rng.uniform(0.01, 0.05);     // relative
  double drift_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double syllable_rate = rng.uniform(3.0, 6.0);     // Hz
  double syllable_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> harm_amp(static_cast<size_t>(n_harm));
  std::vector<double> harm_phase(static_cast<size_t>(n_harm));
  for (int h = 0; h < n_harm; ++h) {
    // 1/h decay with mild jitter keeps the fundamental dominant
    harm_amp[static_cast<size_t>(h)] = (1.0 / (h + 1)) * rng.uniform(0.8, 1.0);
    harm_phase[static_cast<size_t>(h)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.resize(static_cast<size_t>(n));

  double inst_phase = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = i / fs;
    double inst_f0 =
        f0 * (1.0 + drift_depth * std::sin(2.0 * std::numbers::pi * drift_rate * t +
                                           drift_phase));
    inst_phase += 2.0 * std::numbers::pi * inst_f0 / fs;

    double v = 0.0;
    for (int h = 0; h < n_harm; ++h)
      v += harm_amp[static_cast<size_t>(h)] *
           std::sin((h + 1) * inst_phase + harm_phase[static_cast<size_t>(h)]);

    // raised-sine syllable envelope, gated to create silences
    double env_raw =
        0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * syllable_rate * t + syllable_phase);
    double env = env_raw < 0.25 ? 0.0 : std::pow((env_raw - 0.25) / 0.75, 1.5);
    w.samples[static_cast<size_t>(i)] = v * env;
  }

  double peak = peak_abs(w);
  if (peak > 0.0)
    for (auto& s : w.samples) s *= 0.7 / peak;
  return w;
}

Waveform gen_noise(Rng& rng, NoiseKind kind, int len, int sample_rate) {
  if (len <= 0) throw ConfigError("gen_noise: length must be positive");
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<size_t>(len));

  switch (kind) {
    case NoiseKind::White: {
      for (auto& s : w.samples) s = rng.normal();
      break;
    }
    case NoiseKind::Pink: {
      // frequency-domain synthesis: bin magnitude ~ 1/sqrt(f)
      int m = len % 2 == 0 ? len : len + 1;
      std::vector<std::complex<double>> spec(static_cast<size_t>(m / 2 + 1), {0.0, 0.0});
      for (int k = 1; k <= m / 2; ++k) {
        double f = static_cast<double>(k);
        std::complex<double> g(rng.normal(), rng.normal());
        spec[static_cast<size_t>(k)] = g / std::sqrt(f);
      }
      std::vector<double> buf(static_cast<size_t>(m));
      fft::irfft(spec.data(), static_cast<size_t>(m), buf.data());
      for (int i = 0; i < len; ++i) w.samples[static_cast<size_t>(i)] = buf[static_cast<size_t>(i)];
      break;
    }
    case NoiseKind::Modulated: {
      double fm = rng.uniform(1.0, 4.0);
      double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int i = 0; i < len; ++i) {
        double t = static_cast<double>(i) / sample_rate;
        double env =
            0.2 + 0.8 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fm * t + phase));
        w.samples[static_cast<size_t>(i)] = env * rng.normal();
      }
      break;
    }
  }

  // normalize to unit RMS so SNR scaling starts from a known level
  double r = rms(w);
  if (r > 0.0)
    for (auto& s : w.samples) s /= r;
  return w;
}

std::vector<bool> nonsilent_support(const Waveform& w) {
  const int win = std::max(1, w.sample_rate / 50);  // 20 ms
  size_t n = w.samples.size();
  std::vector<double> win_rms((n + win - 1) / win);
  double peak = 0.0;
  for (size_t b = 0; b < win_rms.size(); ++b) {
    double acc = 0.0;
    size_t end = std::min(n, (b + 1) * static_cast<size_t>(win));
    size_t cnt = end - b * win;
    for (size_t i = b * win; i < end; ++i) acc += w.samples[i] * w.samples[i];
    win_rms[b] = std::sqrt(acc / static_cast<double>(cnt));
    peak = std::max(peak, win_rms[b]);
  }
  double thresh = peak * 0.01;  // -40 dB of peak window RMS
  std::vector<bool> mask(n, false);
  for (size_t b = 0; b < win_rms.size(); ++b) {
    if (win_rms[b] <= thresh) continue;
    size_t end = std::min(n, (b + 1) * static_cast<size_t>(win));
    for (size_t i = b * win; i < end; ++i) mask[i] = true;
  }
  return mask;
}

std::pair<Waveform, Waveform> mix_at_snr(const Waveform& clean, const Waveform& noise,
                                         double snr_db, double* renorm) {
  if (clean.samples.size() != noise.samples.size())
    throw ConfigError("mix_at_snr: length mismatch");
  if (clean.samples.empty()) throw ConfigError("mix_at_snr: empty input");

  std::vector<bool> mask = nonsilent_support(clean);
  double p_clean = 0.0, p_noise = 0.0;
  size_t cnt = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    p_clean += clean.samples[i] * clean.samples[i];
    p_noise += noise.samples[i] * noise.samples[i];
    ++cnt;
  }
  if (cnt == 0 || p_clean <= 0.0) throw ConfigError("mix_at_snr: zero-power clean signal");
  if (p_noise <= 0.0) throw ConfigError("mix_at_snr: zero-power noise");
  p_clean /= static_cast<double>(cnt);
  p_noise /= static_cast<double>(cnt);

  double scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform scaled = noise;
  for (auto& s : scaled.samples) s *= scale;

  Waveform noisy = clean;
  for (size_t i = 0; i < noisy.samples.size(); ++i)
    noisy.samples[i] += scaled.samples[i];

  double factor = 1.0;
  double peak = peak_abs(noisy);
  if (peak > 1.0) {
    // joint renormalization preserves the exact SNR
    factor = 1.0 / peak;
    for (auto& s : noisy.samples) s *= factor;
    for (auto& s : scaled.samples) s *= factor;
  }
  if (renorm) *renorm = factor;
  // callers that keep the clean reference must apply the same factor; the
  // dataset builder writes the renormalized clean file
  return {std::move(noisy), std::move(scaled)};
}

std::vector<const ManifestRow*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestRow*> out;
  for (const auto& r : rows)
    if (r.split == name) out.push_back(&r);
  return out;
}

void Manifest::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write manifest: " + path);
  f << "id,clean_path,noise_path,noisy_path,snr_db,split\n";
  f.precision(10);
  for (const auto& r : rows)
    f << r.id << ',' << r.clean_path << ',' << r.noise_path << ',' << r.noisy_path
      << ',' << r.snr_db << ',' << r.split << '\n';
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty manifest: " + path);
  if (line != "id,clean_path,noise_path,noisy_path,snr_db,split")
    throw IoError("unexpected manifest header: " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestRow r;
    std::string snr;
    if (!std::getline(ss, r.id, ',') || !std::getline(ss, r.clean_path, ',') ||
        !std::getline(ss, r.noise_path, ',') || !std::getline(ss, r.noisy_path, ',') ||
        !std::getline(ss, snr, ',') || !std::getline(ss, r.split))
      throw IoError("malformed manifest row: " + line);
    r.snr_db = std::stod(snr);
    m.rows.push_back(std::move(r));
  }
  return m;
}

Manifest build_dataset(const DataConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "wav");

  Manifest manifest;
  manifest.base_dir = out_dir;
  std::ofstream log(fs::path(out_dir) / "build_log.txt", std::ios::trunc);
  log.precision(10);

  Rng root(cfg.seed);
  auto make_split = [&](const std::string& split, int count, uint64_t stream_base) {
    for (int i = 0; i < count; ++i) {
      std::ostringstream id;
      id << split << "_" << std::setw(4) << std::setfill('0') << i;
      // per-utterance stream derived from (seed, split, index)
      Rng rng = root.split(stream_base + static_cast<uint64_t>(i));

      Waveform clean = gen_clean(rng, cfg);
      NoiseKind kind = cfg.noise_kinds[rng.below(cfg.noise_kinds.size())];
      Waveform noise =
          gen_noise(rng, kind, static_cast<int>(clean.samples.size()), cfg.sample_rate);
      double snr = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
      double renorm = 1.0;
      auto [noisy, scaled_noise] = mix_at_snr(clean, noise, snr, &renorm);
      if (renorm != 1.0)
        for (auto& s : clean.samples) s *= renorm;

      ManifestRow row;
      row.id = id.str();
      row.clean_path = "wav/" + row.id + "_clean.wav";
      row.noise_path = "wav/" + row.id + "_noise.wav";
      row.noisy_path = "wav/" + row.id + "_noisy.wav";
      row.snr_db = snr;
      row.split = split;
      save_wav(clean, out_dir + "/" + row.clean_path);
      save_wav(scaled_noise, out_dir + "/" + row.noise_path);
      save_wav(noisy, out_dir + "/" + row.noisy_path);
      log << row.id << " kind=" << to_string(kind) << " snr_db=" << snr
          << " renorm=" << renorm << '\n';
      manifest.rows.push_back(std::move(row));
    }
  };

  // disjoint stream ranges partition train/test by construction
  make_split("train", cfg.n_train, 1u << 20);
  make_split("test", cfg.n_test, 1u << 24);

  manifest.save(out_dir + "/manifest.csv");
  return manifest;
}

}  // namespace gpse
