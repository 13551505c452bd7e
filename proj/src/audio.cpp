#include "gpse/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "gpse/errors.hpp"

namespace gpse {

namespace {

void put_u32(std::vector<char>& b, uint32_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
  b.push_back(static_cast<char>((v >> 16) & 0xff));
  b.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::vector<char>& b, uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

uint32_t get_u32(const char* p) {
  return static_cast<uint8_t>(p[0]) | (static_cast<uint8_t>(p[1]) << 8) |
         (static_cast<uint8_t>(p[2]) << 16) |
         (static_cast<uint32_t>(static_cast<uint8_t>(p[3])) << 24);
}

uint16_t get_u16(const char* p) {
  return static_cast<uint16_t>(static_cast<uint8_t>(p[0]) |
                               (static_cast<uint8_t>(p[1]) << 8));
}

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open wav file: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  int sample_rate = 0;
  uint16_t channels = 0, bits = 0, format = 0;
  bool have_fmt = false;
  const char* data = nullptr;
  uint32_t data_len = 0;

  while (pos + 8 <= buf.size()) {
    const char* id = buf.data() + pos;
    uint32_t len = get_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + len > buf.size()) {
      if (std::memcmp(id, "data", 4) == 0)
        throw IoError("truncated wav data chunk: " + path);
      throw IoError("truncated wav chunk: " + path);
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw IoError("malformed fmt chunk: " + path);
      format = get_u16(buf.data() + pos);
      channels = get_u16(buf.data() + pos + 2);
      sample_rate = static_cast<int>(get_u32(buf.data() + pos + 4));
      bits = get_u16(buf.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = buf.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw IoError("missing fmt/data chunk: " + path);
  if (format != 1 || bits != 16)
    throw IoError("unsupported wav format (need 16-bit PCM): " + path);
  if (channels != 1) throw IoError("unsupported channel count (need mono): " + path);
  if (data_len % 2 != 0) throw IoError("odd data chunk length: " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  size_t n = data_len / 2;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int16_t q = static_cast<int16_t>(get_u16(data + 2 * i));
    w.samples[i] = static_cast<double>(q) / 32767.0;
  }
  return w;
}

void save_wav(const Waveform& w, const std::string& path) {
  for (double s : w.samples)
    if (!std::isfinite(s)) throw IoError("non-finite sample in waveform");
  if (w.sample_rate <= 0) throw IoError("invalid sample rate");

  uint32_t n = static_cast<uint32_t>(w.samples.size());
  uint32_t data_len = n * 2;
  std::vector<char> b;
  b.reserve(44 + data_len);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<uint32_t>(w.sample_rate));
  put_u32(b, static_cast<uint32_t>(w.sample_rate) * 2);  // byte rate
  put_u16(b, 2);                                         // block align
  put_u16(b, 16);                                        // bits
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_len);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto q = static_cast<int16_t>(std::lrint(c * 32767.0));
    put_u16(b, static_cast<uint16_t>(q));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw IoError("write failed: " + path);
}

double rms(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : w.samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(w.samples.size()));
}

double peak_abs(const Waveform& w) {
  double p = 0.0;
  for (double s : w.samples) p = std::max(p, std::fabs(s));
  return p;
}

}  // namespace gpse
