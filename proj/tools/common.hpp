#pragma once

// Helpers shared by the fcn and fcn-server executables.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcn/params_file.hpp"
#include "fcn/serialize.hpp"
#include "fcn/weights_file.hpp"

namespace fcn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;
inline constexpr int kUsage = 2;

/// Bad command line or malformed input file: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

inline const char* kParamsName = "params.txt";
inline const char* kSecretName = "secret.key";
inline const char* kPublicName = "public.key";
inline const char* kEvalName = "eval.key";

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

inline std::uint64_t file_magic(const fs::path& p) {
  auto in = open_in(p);
  std::uint64_t m = 0;
  in.read(reinterpret_cast<char*>(&m), sizeof m);
  return in ? m : 0;
}

inline EvalKeys load_eval_keys(const fs::path& p, const FvContextPtr& ctx) {
  auto in = open_in(p);
  return read_eval_keys(in, ctx);
}

inline PublicKey load_public_key(const fs::path& p, const FvContextPtr& ctx) {
  auto in = open_in(p);
  return read_public_key(in, ctx);
}

/// Numbers separated by commas and/or whitespace; '#' starts a comment.
inline std::vector<double> read_input_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    for (char& c : line) {
      if (c == ',' || c == ';') c = ' ';
    }
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw UsageError(path + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
      }
      out.push_back(v);
    }
  }
  return out;
}

inline std::uint64_t seed_or_random(std::optional<std::uint64_t> s) {
  if (s) return *s;
  std::random_device rd;
  return (std::uint64_t{rd()} << 32) ^ rd();
}

}  // namespace fcn::cli
