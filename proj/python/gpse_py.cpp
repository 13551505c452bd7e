// Python bindings for the main operations: features, SDE kernel, sampler,
// metrics, and synthetic data. Complex spectrograms cross the boundary as
// 2-d complex128 arrays (frames x bins); waveforms as float64 1-d arrays.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpse/config.hpp"
#include "gpse/errors.hpp"
#include "gpse/evaluate.hpp"
#include "gpse/losses.hpp"
#include "gpse/sampler.hpp"
#include "gpse/trainer.hpp"

namespace py = pybind11;
using namespace gpse;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style>;
using DoubleArray = py::array_t<double, py::array::c_style>;

ComplexSpec spec_from_array(const ComplexArray& a) {
  auto buf = a.request();
  if (buf.ndim != 2) throw ConfigError("expected a 2-d complex array (frames x bins)");
  ComplexSpec s(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
  const auto* src = static_cast<const std::complex<double>*>(buf.ptr);
  std::copy(src, src + s.size(), s.data.begin());
  return s;
}

ComplexArray spec_to_array(const ComplexSpec& s) {
  ComplexArray a({s.frames, s.bins});
  auto buf = a.request();
  std::copy(s.data.begin(), s.data.end(), static_cast<std::complex<double>*>(buf.ptr));
  return a;
}

Waveform wave_from_array(const DoubleArray& a, int sample_rate) {
  auto buf = a.request();
  if (buf.ndim != 1) throw ConfigError("expected a 1-d float array");
  Waveform w;
  w.sample_rate = sample_rate;
  const auto* src = static_cast<const double*>(buf.ptr);
  w.samples.assign(src, src + buf.shape[0]);
  return w;
}

DoubleArray wave_to_array(const Waveform& w) {
  DoubleArray a(static_cast<py::ssize_t>(w.samples.size()));
  auto buf = a.request();
  std::copy(w.samples.begin(), w.samples.end(), static_cast<double*>(buf.ptr));
  return a;
}

}  // namespace

PYBIND11_MODULE(gpse, m) {
  m.doc() = "score-diffusion speech enhancement: features, SDE, sampler, metrics";

  py::register_exception<ConfigError>(m, "GpseConfigError");
  py::register_exception<NumericError>(m, "GpseNumericError");

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>())
      .def("split", &Rng::split)
      .def("normal", &Rng::normal)
      .def("uniform", py::overload_cast<>(&Rng::uniform));

  py::class_<StftConfig>(m, "StftConfig")
      .def(py::init<>())
      .def_readwrite("window_len", &StftConfig::window_len)
      .def_readwrite("hop", &StftConfig::hop)
      .def_readwrite("fft_len", &StftConfig::fft_len)
      .def("bins", &StftConfig::bins);

  py::class_<FeatureConfig>(m, "FeatureConfig")
      .def(py::init<>())
      .def_readwrite("stft", &FeatureConfig::stft)
      .def_readwrite("compress_enabled", &FeatureConfig::compress_enabled)
      .def_readwrite("comp_exponent", &FeatureConfig::comp_exponent)
      .def_readwrite("comp_scale", &FeatureConfig::comp_scale);

  py::class_<SdeParams>(m, "SdeParams")
      .def(py::init<>())
      .def_readwrite("gamma", &SdeParams::gamma)
      .def_readwrite("sigma_min", &SdeParams::sigma_min)
      .def_readwrite("sigma_max", &SdeParams::sigma_max)
      .def_readwrite("t_eps", &SdeParams::t_eps)
      .def_readwrite("t_max", &SdeParams::t_max);

  // features
  m.def("load_wav", [](const std::string& path) {
    Waveform w = load_wav(path);
    return py::make_tuple(wave_to_array(w), w.sample_rate);
  });
  m.def("save_wav", [](const DoubleArray& samples, int sample_rate,
                       const std::string& path) {
    save_wav(wave_from_array(samples, sample_rate), path);
  });
  m.def("stft", [](const DoubleArray& samples, int sample_rate, const StftConfig& cfg) {
    return spec_to_array(stft(wave_from_array(samples, sample_rate), cfg));
  });
  m.def("istft",
        [](const ComplexArray& spec, const StftConfig& cfg, int sample_rate) {
          return wave_to_array(istft(spec_from_array(spec), cfg, sample_rate));
        });
  m.def("compress", [](const ComplexArray& spec, double exponent, double scale) {
    return spec_to_array(compress(spec_from_array(spec), exponent, scale));
  });
  m.def("decompress", [](const ComplexArray& spec, double exponent, double scale) {
    return spec_to_array(decompress(spec_from_array(spec), exponent, scale));
  });

  // sde kernel
  m.def("diffusion_coeff", &diffusion_coeff);
  m.def("kernel_std", &kernel_std);
  m.def("drift", [](const ComplexArray& x, const ComplexArray& y, const SdeParams& p) {
    return spec_to_array(drift(spec_from_array(x), spec_from_array(y), p));
  });
  m.def("kernel_mean",
        [](const ComplexArray& x0, const ComplexArray& y, double t, const SdeParams& p) {
          return spec_to_array(kernel_mean(spec_from_array(x0), spec_from_array(y), t, p));
        });
  m.def("sample_perturbed",
        [](const ComplexArray& x0, const ComplexArray& y, double t, const SdeParams& p,
           Rng& rng) {
          auto [x_t, z] = sample_perturbed(spec_from_array(x0), spec_from_array(y), t,
                                           p, rng);
          return py::make_tuple(spec_to_array(x_t), spec_to_array(z));
        });
  m.def("kernel_score",
        [](const ComplexArray& x_t, const ComplexArray& x0, const ComplexArray& y,
           double t, const SdeParams& p) {
          return spec_to_array(kernel_score(spec_from_array(x_t), spec_from_array(x0),
                                            spec_from_array(y), t, p));
        });
  m.def("forward_simulate_em",
        [](const ComplexArray& x0, const ComplexArray& y, int n_steps,
           const SdeParams& p, Rng& rng) {
          return spec_to_array(forward_simulate_em(spec_from_array(x0),
                                                   spec_from_array(y), n_steps, p, rng));
        });
  m.def("analytic_posterior_score",
        [](const ComplexArray& x_t, const ComplexArray& y, double t,
           const ComplexArray& prior_mean, double prior_var, const SdeParams& p) {
          return spec_to_array(analytic_posterior_score(
              spec_from_array(x_t), spec_from_array(y), t, spec_from_array(prior_mean),
              prior_var, p));
        });

  // losses
  m.def("dsm_loss", [](const ComplexArray& score, const ComplexArray& z, double sigma) {
    return dsm_loss(spec_from_array(score), spec_from_array(z), sigma);
  });
  m.def("predictive_loss", [](const ComplexArray& a, const ComplexArray& b) {
    return predictive_loss(spec_from_array(a), spec_from_array(b));
  });
  m.def("combined_loss", &combined_loss);

  // metrics
  m.def("si_sdr", [](const DoubleArray& est, const DoubleArray& ref, int sr) {
    MetricValue v = si_sdr(wave_from_array(est, sr), wave_from_array(ref, sr));
    return py::make_tuple(v.db, v.capped);
  }, py::arg("est"), py::arg("ref"), py::arg("sample_rate") = 8000);
  m.def("si_sir",
        [](const DoubleArray& est, const DoubleArray& ref, const DoubleArray& noise,
           int sr) {
          MetricValue v = si_sir(wave_from_array(est, sr), wave_from_array(ref, sr),
                                 wave_from_array(noise, sr));
          return py::make_tuple(v.db, v.capped);
        },
        py::arg("est"), py::arg("ref"), py::arg("noise"), py::arg("sample_rate") = 8000);
  m.def("si_sar",
        [](const DoubleArray& est, const DoubleArray& ref, const DoubleArray& noise,
           int sr) {
          MetricValue v = si_sar(wave_from_array(est, sr), wave_from_array(ref, sr),
                                 wave_from_array(noise, sr));
          return py::make_tuple(v.db, v.capped);
        },
        py::arg("est"), py::arg("ref"), py::arg("noise"), py::arg("sample_rate") = 8000);
  m.def("log_spectral_distance",
        [](const DoubleArray& est, const DoubleArray& ref, const StftConfig& cfg,
           int sr) {
          return log_spectral_distance(wave_from_array(est, sr),
                                       wave_from_array(ref, sr), cfg);
        },
        py::arg("est"), py::arg("ref"), py::arg("stft_config") = StftConfig{},
        py::arg("sample_rate") = 8000);

  // synthetic data
  py::class_<DataConfig>(m, "DataConfig")
      .def(py::init<>())
      .def_readwrite("n_train", &DataConfig::n_train)
      .def_readwrite("n_test", &DataConfig::n_test)
      .def_readwrite("duration_s", &DataConfig::duration_s)
      .def_readwrite("sample_rate", &DataConfig::sample_rate)
      .def_readwrite("snr_min_db", &DataConfig::snr_min_db)
      .def_readwrite("snr_max_db", &DataConfig::snr_max_db)
      .def_readwrite("seed", &DataConfig::seed);
  m.def("gen_clean", [](Rng& rng, const DataConfig& cfg) {
    return wave_to_array(gen_clean(rng, cfg));
  });
  m.def("gen_noise", [](Rng& rng, const std::string& kind, int len, int sr) {
    return wave_to_array(gen_noise(rng, noise_kind_from_string(kind), len, sr));
  });
  m.def("mix_at_snr",
        [](const DoubleArray& clean, const DoubleArray& noise, double snr_db, int sr) {
          double renorm = 1.0;
          auto [noisy, scaled] = mix_at_snr(wave_from_array(clean, sr),
                                            wave_from_array(noise, sr), snr_db, &renorm);
          return py::make_tuple(wave_to_array(noisy), wave_to_array(scaled), renorm);
        },
        py::arg("clean"), py::arg("noise"), py::arg("snr_db"),
        py::arg("sample_rate") = 8000);
  m.def("build_dataset", [](const DataConfig& cfg, const std::string& out_dir) {
    Manifest man = build_dataset(cfg, out_dir);
    return out_dir + "/manifest.csv";
  });

  // model + sampler
  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_readwrite("base_channels", &NetworkConfig::base_channels)
      .def_readwrite("depth", &NetworkConfig::depth)
      .def_readwrite("time_embed_dim", &NetworkConfig::time_embed_dim)
      .def_property(
          "variant",
          [](const NetworkConfig& c) { return to_string(c.variant); },
          [](NetworkConfig& c, const std::string& v) {
            c.variant = model_variant_from_string(v);
          });

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("n_steps", &SamplerConfig::n_steps)
      .def_readwrite("alpha", &SamplerConfig::alpha)
      .def_readwrite("beta", &SamplerConfig::beta)
      .def_readwrite("corrector_steps", &SamplerConfig::corrector_steps)
      .def_readwrite("corrector_snr", &SamplerConfig::corrector_snr)
      .def_readwrite("seed", &SamplerConfig::seed)
      .def_property(
          "variant",
          [](const SamplerConfig& c) { return to_string(c.variant); },
          [](SamplerConfig& c, const std::string& v) {
            c.variant = sampler_variant_from_string(v);
          });

  py::class_<ScoreModel>(m, "ScoreModel")
      .def(py::init([](const NetworkConfig& nc, const SdeParams& sde,
                       const FeatureConfig& fc, uint64_t seed) {
             return ScoreModel(nc, sde, fc, seed);
           }),
           py::arg("network"), py::arg("sde") = SdeParams{},
           py::arg("features") = FeatureConfig{}, py::arg("seed") = 0)
      .def_static("load_checkpoint", &ScoreModel::load_checkpoint)
      .def("save_checkpoint", &ScoreModel::save_checkpoint, py::arg("path"),
           py::arg("params_are_ema") = false)
      .def("param_count", &ScoreModel::param_scalar_count)
      .def("has_pred_decoder", &ScoreModel::has_pred_decoder)
      .def("score",
           [](const ScoreModel& m, const ComplexArray& x_t, const ComplexArray& y,
              double t) {
             return spec_to_array(m.score(spec_from_array(x_t), spec_from_array(y), t));
           })
      .def("predict",
           [](const ScoreModel& m, const ComplexArray& x_t, const ComplexArray& y,
              double t) {
             return spec_to_array(
                 m.predict(spec_from_array(x_t), spec_from_array(y), t));
           })
      .def("enhance_spec",
           [](const ScoreModel& m, const ComplexArray& y, const SamplerConfig& cfg) {
             Rng rng(cfg.seed);
             auto [xhat, traj] = enhance(m, spec_from_array(y), cfg, m.sde(), rng);
             return spec_to_array(xhat);
           })
      .def("enhance_waveform",
           [](const ScoreModel& m, const DoubleArray& noisy, int sample_rate,
              const SamplerConfig& cfg) {
             Waveform w = wave_from_array(noisy, sample_rate);
             ComplexSpec y = waveform_to_features(w, m.features());
             Rng rng(cfg.seed);
             auto [xhat, traj] = enhance(m, y, cfg, m.sde(), rng);
             return wave_to_array(features_to_waveform(xhat, m.features(), sample_rate));
           },
           py::arg("noisy"), py::arg("sample_rate"), py::arg("config"));
}
