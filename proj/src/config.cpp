#include "dipreg/config.hpp"

#include "dipreg/file_util.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace dipreg {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw std::invalid_argument("config: key '" + key + "' expects " +
                              expected + ", got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "an integer");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "an unsigned integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &consumed);
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
  if (consumed != value.size()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<int> parse_int_list(const std::string& key,
                                const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_int(key, trim(item))));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated integer list");
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text,
                           const std::string& origin) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line +
                                  "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": empty key");
    }
    if (kv.count(key)) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
    }
    kv[key] = value;
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_key_values(std::string(bytes.begin(), bytes.end()),
                          path.string());
}

FileConfig config_from_key_values(const KeyValues& kv) {
  FileConfig out;
  for (const auto& [key, value] : kv) {
    if (key == "method") {
      if (value != "dip" && value != "baseline") {
        bad_value(key, value, "dip or baseline");
      }
      out.method = value;
    } else if (key == "iterations") {
      out.run.iterations = static_cast<int>(parse_int(key, value));
      out.baseline.iterations = out.run.iterations;
    } else if (key == "learning_rate") {
      out.run.learning_rate = parse_double(key, value);
      out.baseline.learning_rate = out.run.learning_rate;
    } else if (key == "beta1") {
      out.run.beta1 = parse_double(key, value);
      out.baseline.beta1 = out.run.beta1;
    } else if (key == "beta2") {
      out.run.beta2 = parse_double(key, value);
      out.baseline.beta2 = out.run.beta2;
    } else if (key == "epsilon") {
      out.run.epsilon = parse_double(key, value);
      out.baseline.epsilon = out.run.epsilon;
    } else if (key == "seed") {
      out.run.seed = parse_u64(key, value);
      out.baseline.seed = out.run.seed;
    } else if (key == "log_every") {
      out.run.log_every = static_cast<int>(parse_int(key, value));
      out.baseline.log_every = out.run.log_every;
    } else if (key == "loss") {
      if (value != "mae") bad_value(key, value, "mae");
      out.run.loss = LossKind::kMae;
    } else if (key == "keep_best") {
      out.run.keep_best = parse_bool(key, value);
      out.baseline.keep_best = out.run.keep_best;
    } else if (key == "patience") {
      out.run.patience = static_cast<int>(parse_int(key, value));
      out.baseline.patience = out.run.patience;
    } else if (key == "lambda") {
      out.baseline.lambda = parse_double(key, value);
    } else if (key == "levels") {
      out.run.generator.levels = static_cast<int>(parse_int(key, value));
    } else if (key == "channels_down") {
      out.run.generator.channels_down = parse_int_list(key, value);
    } else if (key == "channels_up") {
      out.run.generator.channels_up = parse_int_list(key, value);
    } else if (key == "channels_skip") {
      out.run.generator.channels_skip = parse_int_list(key, value);
    } else if (key == "kernel_size") {
      out.run.generator.kernel_size = static_cast<int>(parse_int(key, value));
    } else if (key == "activation_slope") {
      out.run.generator.activation_slope = parse_double(key, value);
    } else if (key == "input_channels") {
      out.run.generator.input_channels =
          static_cast<int>(parse_int(key, value));
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return out;
}

}  // namespace dipreg
