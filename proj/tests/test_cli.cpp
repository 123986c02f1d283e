#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "freqseg/cli/commands.hpp"
#include "freqseg/image_io.hpp"
#include "freqseg/targets.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace freqseg;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

const char* kSmallConfig =
    "[model]\nchannels = 2, 4, 8, 16\n[train]\nepochs = 2\nbatch_size = 2\nseed = 4\nimage_size = 32\n"
    "lr_max = 1e-3\n[data]\nkind = synthetic\nn = 4\nsplit = 0.25\n";

}  // namespace

TEST_SUITE("cli decompose") {
  TEST_CASE("ratio 1 reproduces the input and sidecars sum to it") {
    TempDir dir;
    std::mt19937_64 rng(1);
    Image img(3, 16, 16);
    for (double& v : img.data) v = static_cast<double>(rng() % 256) / 255.0;
    io::write_png(dir / "in.png", img);

    auto r = run({"decompose", "--input", dir / "in.png", "--r", "1", "--out-dir", dir / "o1"});
    REQUIRE(r.code == 0);
    CHECK(io::read_png(dir / "o1/in_low.png").data == img.data);

    r = run({"decompose", "--input", dir / "in.png", "--r", "0.5", "--out-dir", dir / "o2"});
    REQUIRE(r.code == 0);
    Image lo = io::read_f32(dir / "o2/in_low.f32", 3, 16, 16), hi = io::read_f32(dir / "o2/in_high.f32", 3, 16, 16);
    for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(lo.data[i] + hi.data[i] - img.data[i]) < 1e-6);
    Image mask = io::read_pgm(dir / "o2/in_mask.pgm");
    for (double v : mask.data) CHECK((v == 0.0 || v == 1.0));
    CHECK(std::filesystem::exists(dir / "o2/in_high.png"));
  }

  TEST_CASE("errors") {
    TempDir dir;
    CHECK(run({"decompose", "--input", dir / "missing.png", "--out-dir", dir.str()}).code == cli::kDataError);
    Image img(1, 4, 4, 0.5);
    io::write_png(dir / "g.png", img);
    CHECK(run({"decompose", "--input", dir / "g.png", "--r", "1.5", "--out-dir", dir.str()}).code == cli::kConfigError);
    CHECK(run({"decompose"}).code == cli::kConfigError);
    CHECK(run({}).code == cli::kConfigError);
    CHECK(run({"bogus"}).code == cli::kConfigError);
  }
}

TEST_SUITE("cli gen-targets") {
  TEST_CASE("square mask matches the module oracle") {
    TempDir dir;
    Mask m(8, 8);
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) m.at(y, x) = 1;
    io::write_png(dir / "sq.png", io::mask_image(m));
    auto r = run({"gen-targets", "--mask", dir / "sq.png", "--out-dir", dir.str()});
    REQUIRE(r.code == 0);
    CHECK(io::to_mask(io::read_png(dir / "sq_edge.png")) == oracle::sobel(m));
    Image d = io::read_f32(dir / "sq_dist.f32", 1, 8, 8);
    CHECK(*std::max_element(d.data.begin(), d.data.end()) == 1.0f);
    Image dq = io::read_png(dir / "sq_dist.png");
    const Image exact = oracle::distance_brute(m);
    for (std::size_t i = 0; i < dq.data.size(); ++i) CHECK(dq.data[i] * 255.0 == std::round(255.0 * exact.data[i]));
  }

  TEST_CASE("black mask gives black outputs") {
    TempDir dir;
    io::write_png(dir / "z.png", Image(1, 6, 6, 0.0));
    REQUIRE(run({"gen-targets", "--mask", dir / "z.png", "--out-dir", dir.str()}).code == 0);
    for (double v : io::read_png(dir / "z_edge.png").data) CHECK(v == 0.0);
    for (double v : io::read_png(dir / "z_dist.png").data) CHECK(v == 0.0);
  }

  TEST_CASE("unreadable mask") {
    TempDir dir;
    CHECK(run({"gen-targets", "--mask", dir / "no.png", "--out-dir", dir.str()}).code == cli::kDataError);
  }
}

TEST_SUITE("cli train and eval") {
  TEST_CASE("train, rerun, evaluate") {
    TempDir dir;
    write_file(dir / "c.ini", kSmallConfig);
    auto r = run({"train", "--config", dir / "c.ini", "--out", dir / "a.ckpt", "--history", dir / "a.csv"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("iou") != std::string::npos);
    CHECK(r.out.find("validation metrics") != std::string::npos);
    r = run({"train", "--config", dir / "c.ini", "--out", dir / "b.ckpt", "--history", dir / "b.csv"});
    REQUIRE(r.code == 0);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

    auto e1 = run({"eval", "--checkpoint", dir / "a.ckpt", "--data", "synthetic:4:3", "--out", dir / "m1.txt"});
    auto e2 = run({"eval", "--checkpoint", dir / "a.ckpt", "--data", "synthetic:4:3", "--out", dir / "m2.txt"});
    REQUIRE(e1.code == 0);
    CHECK(read_file(dir / "m1.txt") == read_file(dir / "m2.txt"));
    CHECK(e1.out.find("iou=") != std::string::npos);

    auto hi = run({"eval", "--checkpoint", dir / "a.ckpt", "--data", "synthetic:4:3", "--threshold", "1.01", "--out",
                   dir / "m3.txt"});
    REQUIRE(hi.code == 0);
    CHECK(read_file(dir / "m3.txt").find("recall=0\n") != std::string::npos);

    // corrupt one payload byte
    std::string bytes = read_file(dir / "a.ckpt");
    bytes[bytes.size() - 20] ^= 0x40;
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
    CHECK(run({"eval", "--checkpoint", dir / "bad.ckpt", "--data", "synthetic:1:1"}).code == cli::kDataError);
    CHECK(run({"eval", "--checkpoint", dir / "a.ckpt", "--data", "synthetic:x"}).code == cli::kConfigError);
  }

  TEST_CASE("seed override from the environment") {
    TempDir dir;
    write_file(dir / "c.ini", kSmallConfig);
    ::setenv("FREQSEG_SEED", "11", 1);
    auto a = run({"train", "--config", dir / "c.ini", "--out", dir / "a.ckpt", "--history", dir / "a.csv"});
    ::unsetenv("FREQSEG_SEED");
    auto b = run({"train", "--config", dir / "c.ini", "--out", dir / "b.ckpt", "--history", dir / "b.csv"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(read_file(dir / "a.csv") != read_file(dir / "b.csv"));
    ::setenv("FREQSEG_SEED", "abc", 1);
    CHECK(run({"train", "--config", dir / "c.ini", "--out", dir / "c.ckpt"}).code == cli::kConfigError);
    ::unsetenv("FREQSEG_SEED");
  }

  TEST_CASE("config errors") {
    TempDir dir;
    write_file(dir / "g.ini", "[model]\nfd = false\ngcb = true\n");
    auto r = run({"train", "--config", dir / "g.ini", "--out", dir / "x.ckpt"});
    CHECK(r.code == cli::kConfigError);
    write_file(dir / "u.ini", "[train]\nepochs = 1\nlearning = 3\n");
    r = run({"train", "--config", dir / "u.ini", "--out", dir / "x.ckpt"});
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(run({"train", "--config", dir / "none.ini"}).code == cli::kConfigError);
  }

  TEST_CASE("divergence exits 3") {
    TempDir dir;
    write_file(dir / "d.ini",
               "[model]\nchannels = 2, 4, 8, 16\n[train]\nepochs = 2\nbatch_size = 2\nimage_size = 32\n"
               "lr_max = 1e300\nlr_min = 1e299\n[data]\nn = 2\n");
    CHECK(run({"train", "--config", dir / "d.ini", "--out", dir / "d.ckpt", "--history", dir / "d.csv"}).code ==
          cli::kDiverged);
  }
}

TEST_SUITE("cli gradcheck") {
  TEST_CASE("zero tolerance fails") {
    auto r = run({"gradcheck", "--tol", "0"});
    CHECK(r.code == cli::kCheckFailed);
    CHECK(r.out.find("FAILED") != std::string::npos);
  }

  TEST_CASE("report covers alpha and beta") {
    auto r = run({"gradcheck"});
    CHECK(r.code == 0);
    CHECK(r.out.find("sam.alpha") != std::string::npos);
    CHECK(r.out.find("sam.beta") != std::string::npos);
  }
}

TEST_SUITE("cli ablate") {
  TEST_CASE("rows file and invalid rows") {
    TempDir dir;
    write_file(dir / "c.ini",
               "[model]\nchannels = 2, 4, 8, 16\n[train]\nepochs = 1\nbatch_size = 2\nimage_size = 32\n[data]\nn = 2\n");
    write_file(dir / "rows.txt", "# two rows\nplain = 0,0,0,0\nfull = 1,1,1,1\n");
    auto r = run({"ablate", "--config", dir / "c.ini", "--rows", dir / "rows.txt"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("plain") != std::string::npos);
    CHECK(r.out.find("full") != std::string::npos);
    write_file(dir / "bad.txt", "broken = 0,1,0,0\n");
    CHECK(run({"ablate", "--config", dir / "c.ini", "--rows", dir / "bad.txt"}).code == cli::kConfigError);
    write_file(dir / "junk.txt", "x = 2,0,0\n");
    CHECK(run({"ablate", "--config", dir / "c.ini", "--rows", dir / "junk.txt"}).code == cli::kConfigError);
  }
}
