// End-to-end drive of the gpse binary: synth -> train -> enhance -> evaluate
// -> sweep on a minutes-scale configuration, plus exit-code and
// reproducibility checks.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = GPSE_CLI_PATH;
const std::string kRoot = "/tmp/gpse_cli_test";

int run(const std::string& args) {
  std::string cmd = kCli + " " + args + " >> " + kRoot + "/cli.log 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::vector<char> read_all(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<char>((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
}

// CSV body = everything after the '#' comment block
std::string csv_body(const std::string& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::string body, line;
  while (std::getline(f, line))
    if (line.empty() || line[0] != '#') body += line + "\n";
  return body;
}

std::string common_flags() {
  return " --set run.output_dir=" + kRoot + "/out --set data.n_train=6" +
         " --set data.n_test=3 --set data.duration_s=0.5" +
         " --set network.base_channels=4 --set train.epochs=2" +
         " --set train.batch_size=3 --set train.crop_frames=16" +
         " --set sampler.n_steps=3 --set run.run_id=itest";
}

}  // namespace

TEST_CASE("cli: full experiment lifecycle") {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);

  // synth
  REQUIRE(run("synth" + common_flags()) == 0);
  std::string data_dir = kRoot + "/out/itest_data";
  std::string manifest = data_dir + "/manifest.csv";
  CHECK(fs::exists(manifest));
  CHECK(fs::exists(data_dir + "/build_log.txt"));

  // synth rerun is byte-identical (manifest + a sample wav)
  auto manifest_bytes = read_all(manifest);
  auto wav_bytes = read_all(data_dir + "/wav/train_0000_noisy.wav");
  REQUIRE(run("synth" + common_flags()) == 0);
  CHECK(read_all(manifest) == manifest_bytes);
  CHECK(read_all(data_dir + "/wav/train_0000_noisy.wav") == wav_bytes);

  // train
  REQUIRE(run("train --manifest " + manifest + common_flags()) == 0);
  std::string ckpt = kRoot + "/out/itest.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(kRoot + "/out/itest_train_log.csv"));

  // train rerun reproduces the checkpoint bytes
  auto ckpt_bytes = read_all(ckpt);
  REQUIRE(run("train --manifest " + manifest + common_flags()) == 0);
  CHECK(read_all(ckpt) == ckpt_bytes);

  // enhance a single file with trajectory dump
  std::string noisy = data_dir + "/wav/test_0000_noisy.wav";
  std::string enhanced = kRoot + "/enhanced.wav";
  std::string traj = kRoot + "/traj.csv";
  REQUIRE(run("enhance --checkpoint " + ckpt + " --in " + noisy + " --out " +
              enhanced + " --trajectory " + traj + common_flags()) == 0);
  CHECK(fs::exists(enhanced));
  {
    std::ifstream f(traj);
    std::string header;
    std::getline(f, header);
    CHECK(header == "k,t,state_rms,score_rms,event");
    int rows = 0;
    for (std::string line; std::getline(f, line);)
      if (!line.empty()) ++rows;
    CHECK(rows == 4);  // n_steps + 1
  }

  // deterministic enhancement
  auto enhanced_bytes = read_all(enhanced);
  REQUIRE(run("enhance --checkpoint " + ckpt + " --in " + noisy + " --out " +
              enhanced + common_flags()) == 0);
  CHECK(read_all(enhanced) == enhanced_bytes);

  // evaluate
  REQUIRE(run("evaluate --checkpoint " + ckpt + " --manifest " + manifest +
              " --split test" + common_flags()) == 0);
  std::string eval_csv = kRoot + "/out/itest_eval.csv";
  REQUIRE(fs::exists(eval_csv));
  CHECK(fs::exists(kRoot + "/out/itest_eval_summary.json"));
  {
    std::ifstream f(eval_csv);
    std::string first;
    std::getline(f, first);
    CHECK(first == "# schema=gpse-eval-v1");
  }
  std::string eval_body = csv_body(eval_csv);
  CHECK(eval_body.find("test_0000") != std::string::npos);

  // evaluate rerun: byte-identical CSV body
  REQUIRE(run("evaluate --checkpoint " + ckpt + " --manifest " + manifest +
              " --split test" + common_flags()) == 0);
  CHECK(csv_body(eval_csv) == eval_body);

  // sweep over steps with the mixture baseline row
  REQUIRE(run("sweep --checkpoint " + ckpt + " --manifest " + manifest +
              " --axis steps --values 1,2 --variants gp-sgmse+,gp-unified"
              " --split test" +
              common_flags()) == 0);
  std::string sweep_csv = kRoot + "/out/itest_sweep_steps.csv";
  REQUIRE(fs::exists(sweep_csv));
  std::string sweep_body = csv_body(sweep_csv);
  CHECK(sweep_body.find("mixture,") != std::string::npos);
  CHECK(sweep_body.find("gp-sgmse+,1,") != std::string::npos);
  CHECK(sweep_body.find("gp-sgmse+,2,") != std::string::npos);
  CHECK(sweep_body.find("gp-unified,1,") != std::string::npos);
  CHECK(sweep_body.find("gp-unified,2,") != std::string::npos);
  CHECK(sweep_body.find("predictive-output,") != std::string::npos);

  // beta sweep grid
  REQUIRE(run("sweep --checkpoint " + ckpt + " --manifest " + manifest +
              " --axis beta --values 0.0,0.5,1.0 --steps 1,2"
              " --variants gp-unified --split test" +
              common_flags()) == 0);
  std::string beta_csv = kRoot + "/out/itest_sweep_beta.csv";
  std::string beta_body = csv_body(beta_csv);
  // 3 beta values x 2 step counts
  int beta_rows = 0;
  for (size_t pos = 0;
       (pos = beta_body.find("gp-unified,", pos)) != std::string::npos; ++pos)
    ++beta_rows;
  CHECK(beta_rows == 6);
}

TEST_CASE("cli: exit codes") {
  fs::create_directories(kRoot);
  CHECK(run("synth --set data.n_train=abc") == 2);
  CHECK(run("synth --set nope.key=2") == 2);
  CHECK(run("synth --set stft.fft_len=200 --set stft.window_len=200") == 2);
  CHECK(run("evaluate --checkpoint /nonexistent.ckpt --manifest /nonexistent.csv") ==
        1);
  // config file with an invalid value is a config error
  std::string cfg_path = kRoot + "/bad.ini";
  {
    std::ofstream f(cfg_path);
    f << "[data]\nn_train = -3\n";
  }
  CHECK(run("synth --config " + cfg_path) == 2);
}
