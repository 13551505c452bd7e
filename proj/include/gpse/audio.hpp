#pragma once

#include <string>
#include <vector>

namespace gpse {

struct Waveform {
  std::vector<double> samples;  // amplitude in [-1, 1]
  int sample_rate = 8000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// 16-bit PCM mono RIFF only. Samples map as s = q / 32767 so that a full-scale
// write/read round-trip stays within half an LSB.
Waveform load_wav(const std::string& path);
void save_wav(const Waveform& w, const std::string& path);

double rms(const Waveform& w);
double peak_abs(const Waveform& w);

}  // namespace gpse
