// Drives the fcn and fcn-server executables end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "fcn/engine.hpp"
#include "fcn/params_file.hpp"
#include "fcn/weights_file.hpp"

namespace fcn {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FCN_BIN) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (const auto k = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), k);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// "key,value" lines of a command's output.
std::map<std::string, std::string> fields(const std::string& out) {
  std::map<std::string, std::string> m;
  std::istringstream is(out);
  std::string line;
  while (std::getline(is, line)) {
    const auto c = line.find(',');
    if (c != std::string::npos) m.emplace(line.substr(0, c), line.substr(c + 1));
  }
  return m;
}

std::vector<double> scores(const std::string& out, std::size_t classes) {
  const auto f = fields(out);
  std::vector<double> s;
  for (std::size_t i = 0; i < classes; ++i) {
    const auto v = f.at(std::to_string(i));
    s.push_back(std::stod(v.substr(0, v.find(','))));
  }
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fcn_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }
  std::string tiny_keys() const {
    const auto r = run("keygen --params " + std::string(FCN_DATA_DIR) + "/tiny.params --out " + path("k"));
    EXPECT_EQ(r.code, 0) << r.out;
    return path("k");
  }
  static std::string model() { return std::string(FCN_DATA_DIR) + "/tiny.fcnw"; }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("hops --config bogus").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, KeygenDefaultParamsHeader) {
  const auto r = run("keygen --out " + path("k") + " --seed 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(fields(r.out).at("n"), "8192");
  for (const char* name : {"secret.key", "public.key", "eval.key"}) {
    const auto bytes = slurp(dir_ / "k" / name);
    ASSERT_GE(bytes.size(), 24u);
    std::uint64_t n = 0;
    std::memcpy(&n, bytes.data() + 16, 8);
    EXPECT_EQ(n, 8192u) << name;
  }
}

TEST_F(Cli, KeygenDeterministicUnderSeed) {
  const std::string params = std::string(FCN_DATA_DIR) + "/tiny.params";
  ASSERT_EQ(run("keygen --params " + params + " --out " + path("a") + " --seed 42").code, 0);
  ASSERT_EQ(run("keygen --params " + params + " --out " + path("b") + " --seed 42").code, 0);
  ASSERT_EQ(run("keygen --params " + params + " --out " + path("c") + " --seed 43").code, 0);
  for (const char* name : {"secret.key", "public.key", "eval.key", "params.txt"}) {
    EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name)) << name;
  }
  EXPECT_NE(slurp(dir_ / "a" / "secret.key"), slurp(dir_ / "c" / "secret.key"));
}

TEST_F(Cli, KeygenRefusesToOverwrite) {
  tiny_keys();
  const auto before = slurp(dir_ / "k" / "secret.key");
  const auto again = run("keygen --params " + std::string(FCN_DATA_DIR) + "/tiny.params --out " + path("k") +
                         " --seed 99");
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.out.find("--force"), std::string::npos) << again.out;
  EXPECT_EQ(slurp(dir_ / "k" / "secret.key"), before);
  EXPECT_EQ(run("keygen --params " + std::string(FCN_DATA_DIR) + "/tiny.params --out " + path("k") +
                " --seed 99 --force")
                .code,
            0);
  EXPECT_NE(slurp(dir_ / "k" / "secret.key"), before);
}

TEST_F(Cli, BadParamsFileIsLineNumberedExitTwo) {
  const auto bad = write("bad.params", "n = 1024\n# fine\nlimbs = 1, two\n");
  const auto r = run("keygen --params " + bad + " --out " + path("k"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad.params:3:"), std::string::npos) << r.out;
}

TEST_F(Cli, InferOnZerosMatchesPlain) {
  const auto keys = tiny_keys();
  std::string zeros;
  for (int i = 0; i < 16; ++i) zeros += i ? ",0" : "0";
  write("zeros.csv", zeros + "\n");
  const auto r = run("infer --model " + model() + " --keys " + keys + " --input " + path("zeros.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto net = load_weights(model());
  const auto plain = eval_plain(net, std::vector<double>(16, 0.0));
  const auto got = scores(r.out, plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_DOUBLE_EQ(got[i], plain[i]) << i;
}

TEST_F(Cli, InferArgmaxAndHopReport) {
  const auto keys = tiny_keys();
  const auto net = load_weights(model());
  const auto cfg = load_params(std::string(FCN_DATA_DIR) + "/tiny.params").fixed_point();
  const auto projected = project_hops(net, cfg).totals();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> xs(16);
    std::ostringstream csv;
    csv.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = u(rng);
      csv << (i ? "," : "") << xs[i];
    }
    write("x.csv", csv.str());
    const auto r = run("infer --model " + model() + " --keys " + keys + " --input " + path("x.csv") +
                       " --seed " + std::to_string(trial) + " --hops-report " + path("h.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto plain = eval_plain(net, xs);
    const auto f = fields(r.out);
    const auto want = std::max_element(plain.begin(), plain.end()) - plain.begin();
    EXPECT_EQ(f.at("argmax"), std::to_string(want)) << r.out;
    EXPECT_EQ(f.at("hops_match_projection"), "true");

    const auto report = fields(slurp(path("h.csv")));
    std::istringstream total(report.at("total"));
    std::uint64_t pa, ca, pm, cm;
    char comma;
    total >> pa >> comma >> ca >> comma >> pm >> comma >> cm;
    EXPECT_EQ(pa, projected.pt_ct_add);
    EXPECT_EQ(ca, projected.ct_ct_add);
    EXPECT_EQ(pm, projected.pt_ct_mul);
    EXPECT_EQ(cm, projected.ct_ct_mul);
  }
}

TEST_F(Cli, InferRejectsBadInput) {
  const auto keys = tiny_keys();
  write("short.csv", "1,2,3\n");
  EXPECT_EQ(run("infer --model " + model() + " --keys " + keys + " --input " + path("short.csv")).code, 2);
  write("junk.csv", "0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,zero\n");
  EXPECT_EQ(run("infer --model " + model() + " --keys " + keys + " --input " + path("junk.csv")).code, 2);
  write("big.csv", "0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,3\n");
  EXPECT_EQ(run("infer --model " + model() + " --keys " + keys + " --input " + path("big.csv")).code, 2);
  write("garbage.fcnw", "FCNW-not-really");
  write("z.csv", "0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
  EXPECT_EQ(run("infer --model " + path("garbage.fcnw") + " --keys " + keys + " --input " + path("z.csv")).code, 2);
}

TEST_F(Cli, ServeClientLoopbackMatchesLocalInfer) {
  const auto keys = tiny_keys();
  write("x.csv", "0.5,-0.25,0.125,1\n0,0,0.75,-1\n0.3,0.2,0.1,0\n-0.5,0.5,-0.5,0.5\n");
  const auto local = run("infer --model " + model() + " --keys " + keys + " --input " + path("x.csv") + " --seed 9");
  ASSERT_EQ(local.code, 0) << local.out;

  const std::string serve = std::string(FCN_BIN) + " serve --model " + model() + " --params " + keys +
                            "/params.txt --eval-keys " + keys + "/eval.key --listen 127.0.0.1:0 --max-connections 1 > " +
                            path("srv.out") + " 2>&1";
  std::thread server([&] { EXPECT_EQ(std::system(serve.c_str()), 0); });
  std::string port;
  for (int i = 0; i < 200 && port.empty(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    const auto s = slurp(path("srv.out"));
    if (const auto c = s.find("listening on "); c != std::string::npos && s.find('\n', c) != std::string::npos) {
      const auto line = s.substr(c, s.find('\n', c) - c);
      port = line.substr(line.rfind(':') + 1);
    }
  }
  ASSERT_FALSE(port.empty()) << slurp(path("srv.out"));
  const auto remote = run("client --keys " + keys + " --input " + path("x.csv") + " --seed 9 --connect 127.0.0.1:" + port);
  server.join();
  ASSERT_EQ(remote.code, 0) << remote.out;
  EXPECT_EQ(scores(remote.out, 3), scores(local.out, 3));
  EXPECT_EQ(fields(remote.out).at("argmax"), fields(local.out).at("argmax"));
}

TEST_F(Cli, ServeRejectsSecretKeyArguments) {
  const auto keys = tiny_keys();
  const std::string base = "serve --model " + model() + " --params " + keys + "/params.txt --max-connections 1 ";
  EXPECT_EQ(run(base + "--eval-keys " + keys + "/eval.key --secret-key " + keys + "/secret.key").code, 2);
  EXPECT_EQ(run(base + "--eval-keys " + keys + "/eval.key --keys " + keys).code, 2);
  const auto r = run(base + "--eval-keys " + keys + "/secret.key");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("secret key"), std::string::npos) << r.out;
}

TEST_F(Cli, ServerBinaryHasNoDecryptSymbols) {
  FILE* p = popen(("nm -C " + std::string(FCN_SERVER_BIN) + " 2>/dev/null").c_str(), "r");
  ASSERT_NE(p, nullptr);
  std::string syms;
  std::array<char, 4096> buf{};
  while (const auto k = fread(buf.data(), 1, buf.size(), p)) syms.append(buf.data(), k);
  pclose(p);
  if (syms.empty()) GTEST_SKIP() << "nm unavailable";
  EXPECT_NE(syms.find("fcn::eval_encrypted"), std::string::npos);
  for (const char* sym : {"fcn::decrypt(", "fcn::noise_budget(", "fcn::read_secret_key(", "fcn::decrypt_output("}) {
    EXPECT_EQ(syms.find(sym), std::string::npos) << sym;
  }
}

TEST_F(Cli, ApproxSwishPrintsOptimalExponents) {
  const auto r = run("approx --fn swish");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(fields(r.out).at("optimal_exponents"), "-3,-1,-4");
  EXPECT_EQ(fields(r.out).at("optimal_form"), "2^-3 x^2 + 2^-1 x + 2^-4");
  EXPECT_EQ(run("approx --fn nope").code, 1);
}

TEST_F(Cli, CompressQuantizeReportsMonomial) {
  ASSERT_EQ(run("demo-model --kind cryptonets --out " + path("c.fcnw")).code, 0);
  const auto before = run("compress --model " + path("c.fcnw"));
  EXPECT_EQ(fields(before.out).at("monomial_encodable"), "false");
  const auto r = run("compress --model " + path("c.fcnw") + " --prune 0.2 --quantize 1.0 --out " + path("q.fcnw") +
                     " --csv " + path("s.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(fields(r.out).at("monomial_encodable"), "true");
  EXPECT_EQ(fields(run("compress --model " + path("q.fcnw")).out).at("monomial_encodable"), "true");
  EXPECT_EQ(fields(run("compress --model " + model() + " --quantize 1.0").out).at("monomial_encodable"), "true");
}

TEST_F(Cli, HopsCompareRatio) {
  const auto r = run("hops --config compare --maps 5");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto f = fields(r.out);
  const auto cfgs = build_mnist_configs(5, 1);
  const double ratio = double(project_hops(cfgs.cryptonets).totals().total()) /
                       double(project_hops(cfgs.faster).totals().total());
  EXPECT_NEAR(std::stod(f.at("ratio")), ratio, 1e-3);
  const auto single = run("hops --config faster --maps 5");
  EXPECT_NE(single.out.find("layer,pt_ct_add"), std::string::npos);
  EXPECT_EQ(fields(single.out).at("total").substr(0, 5), "3150,");
}

}  // namespace
}  // namespace fcn
