#include "dipreg/config.hpp"
#include "dipreg/field_io.hpp"
#include "dipreg/file_util.hpp"
#include "dipreg/image_io.hpp"
#include "dipreg/random.hpp"
#include "dipreg/report.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace dipreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dipreg_test_" + std::to_string(
                                 std::chrono::steady_clock::now()
                                     .time_since_epoch()
                                     .count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("PGM fixture bytes decode to /255 values") {
  TempDir tmp;
  const fs::path p = tmp.path / "fixture.pgm";
  // Hand-written 2x2 P5 file with a comment line.
  const std::string header = "P5\n# fixture\n2 2\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.push_back(0);
  bytes.push_back(255);
  bytes.push_back(128);
  bytes.push_back(64);
  write_bytes(p, bytes);

  Tensor img = load_image(p);
  CHECK(img.shape() == Shape{1, 2, 2});
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 0, 1) == 1.0);
  CHECK(img.at(0, 1, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(img.at(0, 1, 1) == doctest::Approx(64.0 / 255.0).epsilon(1e-15));

  SUBCASE("save/load round-trips bitwise") {
    const fs::path copy = tmp.path / "copy.pgm";
    save_image(copy, img);
    Tensor again = load_image(copy);
    CHECK((again.values() == img.values()).all());
    // Quantized values round-trip through the byte level untouched.
    const auto original = read_file_bytes(p);
    const auto rewritten = read_file_bytes(copy);
    CHECK(std::equal(original.end() - 4, original.end(),
                     rewritten.end() - 4));
  }
}

TEST_CASE("image loader error contract") {
  TempDir tmp;
  SUBCASE("missing file names the path") {
    const fs::path p = tmp.path / "missing.pgm";
    CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("missing.pgm"),
                         std::runtime_error);
  }
  SUBCASE("truncated PGM payload is rejected with an offset") {
    const fs::path p = tmp.path / "short.pgm";
    const std::string header = "P5\n4 4\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.push_back(7);  // only 1 of 16 payload bytes
    write_bytes(p, bytes);
    CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("16-bit PGM is rejected") {
    const fs::path p = tmp.path / "deep.pgm";
    const std::string header = "P5\n2 2\n65535\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.resize(bytes.size() + 8, 0);
    write_bytes(p, bytes);
    CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("maxval"),
                         std::runtime_error);
  }
  SUBCASE("unknown format is rejected") {
    const fs::path p = tmp.path / "noise.bin";
    write_bytes(p, {1, 2, 3, 4, 5});
    CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("format"),
                         std::runtime_error);
  }
}

TEST_CASE("PNG round-trip and luminance conversion") {
  TempDir tmp;
  Rng rng(4);
  ArrayXd values(12 * 17);
  for (Index i = 0; i < values.size(); ++i) values[i] = rng.uniform();
  Tensor img = Tensor::constant({1, 12, 17}, values);

  const fs::path p = tmp.path / "gray.png";
  save_image(p, img);
  Tensor loaded = load_image(p);
  REQUIRE(loaded.shape() == img.shape());
  // Round-trip through 8 bits: exact at the quantized levels.
  for (Index i = 0; i < img.size(); ++i) {
    const double quantized =
        std::lround(std::clamp(img.values()[i], 0.0, 1.0) * 255.0) / 255.0;
    CHECK(loaded.values()[i] == doctest::Approx(quantized).epsilon(1e-12));
  }

  SUBCASE("second save is byte-identical (deterministic encoder)") {
    const fs::path p2 = tmp.path / "gray2.png";
    save_image(p2, img);
    CHECK(read_file_bytes(p) == read_file_bytes(p2));
  }
  SUBCASE("truncated PNG is rejected") {
    auto bytes = read_file_bytes(p);
    bytes.resize(bytes.size() / 2);
    const fs::path broken = tmp.path / "broken.png";
    write_bytes(broken, bytes);
    CHECK_THROWS_AS(load_image(broken), std::runtime_error);
  }
  SUBCASE("corrupt chunk CRC is rejected") {
    auto bytes = read_file_bytes(p);
    bytes[bytes.size() - 5] ^= 0xFF;  // inside IEND CRC
    const fs::path broken = tmp.path / "badcrc.png";
    write_bytes(broken, bytes);
    CHECK_THROWS_WITH_AS(load_image(broken), doctest::Contains("CRC"),
                         std::runtime_error);
  }
}

TEST_CASE("field file round-trip preserves float32 precision") {
  TempDir tmp;
  Rng rng(6);
  Tensor u = sample_normal(rng, {2, 5, 9}, 0.0, 3.0);
  DisplacementField field{u};
  const fs::path p = tmp.path / "field.dipf";
  save_field(p, field);

  SUBCASE("size is 16-byte header plus 8*H*W") {
    CHECK(fs::file_size(p) == 16 + 8 * 5 * 9);
  }
  SUBCASE("values come back as their float32 narrowing") {
    DisplacementField loaded = load_field(p);
    REQUIRE(loaded.u.shape() == u.shape());
    for (Index i = 0; i < u.size(); ++i) {
      CHECK(loaded.u.values()[i] ==
            static_cast<double>(static_cast<float>(u.values()[i])));
    }
  }
  SUBCASE("corrupted magic is rejected") {
    auto bytes = read_file_bytes(p);
    bytes[0] = 'X';
    const fs::path broken = tmp.path / "broken.dipf";
    write_bytes(broken, bytes);
    CHECK_THROWS_WITH_AS(load_field(broken), doctest::Contains("magic"),
                         std::runtime_error);
  }
  SUBCASE("wrong version is rejected") {
    auto bytes = read_file_bytes(p);
    bytes[4] = 9;
    const fs::path broken = tmp.path / "version.dipf";
    write_bytes(broken, bytes);
    CHECK_THROWS_WITH_AS(load_field(broken), doctest::Contains("version"),
                         std::runtime_error);
  }
  SUBCASE("length mismatch is rejected") {
    auto bytes = read_file_bytes(p);
    bytes.pop_back();
    const fs::path broken = tmp.path / "short.dipf";
    write_bytes(broken, bytes);
    CHECK_THROWS_WITH_AS(load_field(broken), doctest::Contains("length"),
                         std::runtime_error);
  }
}

TEST_CASE("atomic writes leave no temp files behind") {
  TempDir tmp;
  const fs::path p = tmp.path / "out.txt";
  atomic_write_file(p, std::string("hello"));
  atomic_write_file(p, std::string("world"));  // overwrite
  int entries = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK(read_file_bytes(p).size() == 5);
}

TEST_CASE("key-value configuration parsing") {
  const std::string text =
      "# run settings\n"
      "iterations = 500\n"
      "learning_rate = 5e-4   # inline comment\n"
      "seed = 99\n"
      "lambda = 0.25\n"
      "levels = 3\n"
      "channels_down = 8, 16, 32\n"
      "channels_up = 8,16,32\n"
      "channels_skip = 2,2,2\n"
      "input_channels = 4\n"
      "method = baseline\n"
      "keep_best = true\n";
  FileConfig config = config_from_key_values(parse_key_values(text));
  CHECK(config.run.iterations == 500);
  CHECK(config.run.learning_rate == 5e-4);
  CHECK(config.baseline.learning_rate == 5e-4);
  CHECK(config.run.seed == 99);
  CHECK(config.baseline.lambda == 0.25);
  CHECK(config.run.generator.levels == 3);
  CHECK(config.run.generator.channels_down == std::vector<int>{8, 16, 32});
  CHECK(config.run.generator.input_channels == 4);
  CHECK(config.method.value() == "baseline");
  CHECK(config.run.keep_best);

  SUBCASE("unknown keys are named in the error") {
    CHECK_THROWS_WITH_AS(
        config_from_key_values(parse_key_values("iterationz = 3\n")),
        doctest::Contains("iterationz"), std::invalid_argument);
  }
  SUBCASE("malformed numbers are rejected") {
    CHECK_THROWS_AS(
        config_from_key_values(parse_key_values("iterations = ten\n")),
        std::invalid_argument);
  }
  SUBCASE("duplicate keys are rejected") {
    CHECK_THROWS_WITH_AS(parse_key_values("seed = 1\nseed = 2\n"),
                         doctest::Contains("duplicate"),
                         std::invalid_argument);
  }
  SUBCASE("missing separator is rejected") {
    CHECK_THROWS_AS(parse_key_values("no separator here\n"),
                    std::invalid_argument);
  }
}

TEST_CASE("report serialization is deterministic") {
  PairMetrics m;
  m.method = "dip";
  m.ssim = 0.9321;
  m.mean_detj = 1.0065;
  m.std_detj = 0.042;
  m.neg_frac = 0.0;
  m.final_loss = 0.0123;
  const std::string a = metrics_to_json(m);
  const std::string b = metrics_to_json(m);
  CHECK(a == b);
  CHECK(a.find("\"method\": \"dip\"") != std::string::npos);
  CHECK(a.find("\"ssim\"") != std::string::npos);

  std::vector<LossSample> curve = {{0, 0.5}, {10, 0.25}};
  const std::string csv = loss_curve_to_csv(curve);
  CHECK(csv == "iteration,loss\n0,0.5\n10,0.25\n");

  BenchRow ok{"pair_000", "dip", m, ""};
  BenchRow failed{"pair_001", "baseline", std::nullopt,
                  "synth: bad, very bad"};
  const std::string rows = bench_rows_to_csv({ok, failed});
  CHECK(rows.find("pair_000,dip,0.9321,") != std::string::npos);
  CHECK(rows.find("pair_001,baseline,,,,,,synth: bad; very bad") !=
        std::string::npos);
}
