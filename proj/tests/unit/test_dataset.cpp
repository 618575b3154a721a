#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

#include "vtp/dataset.hpp"
#include "vtp/error.hpp"
#include "vtp/parallel.hpp"

using namespace vtp;

namespace {

// Smooth stand-in for the oracle: frequencies depend linearly on the inputs.
ModalResult fake_oracle(const PlateParams& p) {
  ModalResult r;
  const auto v = p.to_vector();
  double outline = 0.0, thickness = 0.0;
  for (std::size_t i = 0; i < kOutlineCount; ++i) outline += v[i];
  for (std::size_t i = 0; i < kThicknessCount; ++i) thickness += v[kOutlineCount + i];
  for (std::size_t m = 0; m < kModeCount; ++m) {
    r.freqs_hz[m] = 100.0 * static_cast<double>(m + 1) * (thickness / 8.0) * (20.0 / outline) *
                    std::sqrt(p.material.e_long / 1e10 * 400.0 / p.material.rho);
  }
  r.rigid_modes = 3;
  return r;
}

GenerateOptions fake_options(std::size_t n, double sigma, unsigned workers = 1) {
  GenerateOptions opts;
  opts.n = n;
  opts.sigma = {sigma, sigma, sigma};
  opts.seed = 11;
  opts.workers = workers;
  opts.labeler = fake_oracle;
  return opts;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vtp_test_" + name);
}

}  // namespace

TEST_CASE("zero sigma produces identical reference samples") {
  const SampleSet set = generate(ReferencePlate::violin(), fake_options(100, 0.0));
  REQUIRE(set.samples.size() == 100);
  const Sample& first = set.samples.front();
  CHECK(first.params == PlateParams::reference());
  for (const Sample& s : set.samples) {
    CHECK(s.params == first.params);
    CHECK(s.freqs_hz == first.freqs_hz);
  }
  CHECK(set.meta.rejected_draws == 0);
}

TEST_CASE("generation is deterministic and independent of the worker count") {
  const SampleSet a = generate(ReferencePlate::violin(), fake_options(200, 0.05, 1));
  const SampleSet b = generate(ReferencePlate::violin(), fake_options(200, 0.05, 4));
  CHECK(fingerprint(a) == fingerprint(b));
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].params == b.samples[i].params);

  GenerateOptions other = fake_options(200, 0.05);
  other.seed = 12;
  CHECK(fingerprint(generate(ReferencePlate::violin(), other)) != fingerprint(a));
}

TEST_CASE("split is a disjoint nine to one partition") {
  for (std::size_t n : {100u, 105u, 3000u}) {
    SampleSet set;
    set.samples.resize(n);
    set.meta.n = n;
    const SampleSet s = split(set, 3);
    CHECK(s.test.size() == static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0)));
    CHECK(s.train.size() + s.test.size() == n);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == n);
    CHECK(*all.rbegin() == n - 1);
    CHECK(split(set, 3).test == s.test);
    CHECK_FALSE(split(set, 4).test == s.test);
  }
  SampleSet tiny;
  tiny.samples.resize(5);
  CHECK_THROWS_AS(split(tiny, 1), Error);
}

TEST_CASE("JSONL round trip preserves samples, split and fingerprint") {
  const SampleSet set = generate(ReferencePlate::violin(), fake_options(120, 0.05));
  const auto path = temp_path("roundtrip.jsonl");
  save_jsonl(set, path);
  const SampleSet back = load_jsonl(path);
  CHECK(back.samples.size() == set.samples.size());
  CHECK(back.train == set.train);
  CHECK(back.test == set.test);
  CHECK(back.meta.seed == set.meta.seed);
  CHECK(back.meta.sigma.outline == set.meta.sigma.outline);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    CHECK(back.samples[i].params == set.samples[i].params);
    CHECK(back.samples[i].freqs_hz == set.samples[i].freqs_hz);
  }
  CHECK(fingerprint(back) == fingerprint(set));
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset files are rejected") {
  const auto path = temp_path("bad.jsonl");
  {
    std::ofstream out(path);
    out << "{\"type\":\"sample\",\"index\":0}\n";
  }
  CHECK_THROWS_AS(load_jsonl(path), Error);
  {
    std::ofstream out(path);
    out << "not json\n";
  }
  CHECK_THROWS_AS(load_jsonl(path), Error);

  const SampleSet set = generate(ReferencePlate::violin(), fake_options(100, 0.05));
  save_jsonl(set, path);
  std::string text;
  {
    std::ifstream in(path);
    std::getline(in, text, '\0');
  }
  text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  {
    std::ofstream out(path);
    out << text;
  }
  CHECK_THROWS_AS(load_jsonl(path), Error);
  CHECK_THROWS_AS(load_jsonl(temp_path("does_not_exist.jsonl")), Error);
  std::filesystem::remove(path);
}

TEST_CASE("geometry rejections are redrawn without counting as solver failures") {
  GenerateOptions opts = fake_options(200, 0.05);
  opts.labeler = [](const PlateParams& p) {
    if (p.outline.p[1] > 1.1) throw Error(ErrorCode::SelfIntersectingOutline, "fake");
    return fake_oracle(p);
  };
  const SampleSet set = generate(ReferencePlate::violin(), opts);
  CHECK(set.meta.rejected_draws > 0);
  CHECK(set.meta.oracle_failures == 0);
  for (const Sample& s : set.samples) CHECK(s.params.outline.p[1] <= 1.1);
}

TEST_CASE("solver failure rate above one percent aborts generation") {
  GenerateOptions opts = fake_options(200, 0.05);
  opts.labeler = [](const PlateParams& p) {
    if (p.outline.p[0] > 1.0 + 1.645 * 0.05) throw Error(ErrorCode::EigenSolveFailure, "fake");
    return fake_oracle(p);
  };
  try {
    generate(ReferencePlate::violin(), opts);
    FAIL("expected OracleFailureRate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OracleFailureRate);
  }

  opts.labeler = [](const PlateParams& p) {
    if (p.outline.p[0] > 1.0 + 3.5 * 0.05) throw Error(ErrorCode::EigenSolveFailure, "fake");
    return fake_oracle(p);
  };
  const SampleSet ok = generate(ReferencePlate::violin(), opts);
  CHECK(ok.meta.oracle_failures <= 2);
}

TEST_CASE("generation input guards and progress reporting") {
  CHECK_THROWS_AS(generate(ReferencePlate::violin(), fake_options(50, 0.05)), Error);
  CHECK_THROWS_AS(generate(ReferencePlate::violin(), fake_options(100, -0.1)), Error);

  GenerateOptions opts = fake_options(100, 0.05, 3);
  std::atomic<std::size_t> calls{0};
  std::size_t last = 0;
  opts.progress = [&](std::size_t done, std::size_t total) {
    ++calls;
    CHECK(total == 100);
    last = std::max(last, done);
  };
  generate(ReferencePlate::violin(), opts);
  CHECK(calls == 100);
  CHECK(last == 100);
}

TEST_CASE("oracle-labelled samples are physically plausible") {
  GenerateOptions opts = fake_options(100, 0.05, default_workers());
  opts.labeler = {};
  opts.oracle.resolution = 120.0;
  opts.n = 100;
  const SampleSet set = generate(ReferencePlate::violin(), opts);
  for (const Sample& s : set.samples) {
    CHECK(std::is_sorted(s.freqs_hz.begin(), s.freqs_hz.end()));
    CHECK(s.freqs_hz[0] > 20.0);
    CHECK(s.freqs_hz[9] < 2000.0);
  }
}

TEST_CASE("merging keeps every part's split") {
  const SampleSet a = generate(ReferencePlate::violin(), fake_options(100, 0.05));
  GenerateOptions other = fake_options(120, 0.1);
  other.seed = 5;
  const SampleSet b = generate(ReferencePlate::violin(), other);
  const SampleSet m = merge({a, b});
  CHECK(m.samples.size() == 220);
  CHECK(m.meta.n == 220);
  CHECK(m.test.size() == a.test.size() + b.test.size());
  CHECK(m.train.size() == a.train.size() + b.train.size());
  CHECK(m.samples[m.test.back()].params == b.samples[b.test.back()].params);
  CHECK(m.samples[m.train.front()].params == a.samples[a.train.front()].params);
  CHECK_THROWS_AS(merge({}), Error);
}
