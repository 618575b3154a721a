#include "vtp/dataset.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>

#include "vtp/error.hpp"
#include "vtp/parallel.hpp"
#include "vtp/rng.hpp"

namespace vtp {

namespace {

constexpr int kFormatVersion = 1;

// Unbiased draw in [0, bound) that does not depend on the standard library's
// distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

struct Outcome {
  Sample sample;
  std::size_t rejected = 0;
  std::size_t failures = 0;
};

}  // namespace

SampleSet generate(const ReferencePlate& ref, const GenerateOptions& options) {
  if (options.n < kMinDatasetSize) {
    throw Error(ErrorCode::InvalidParams, "dataset needs at least 100 samples");
  }
  if (options.sigma.outline < 0.0 || options.sigma.thickness < 0.0 || options.sigma.material < 0.0) {
    throw Error(ErrorCode::InvalidParams, "sigma must be non-negative");
  }
  const Labeler labeler = options.labeler ? options.labeler : Labeler([&](const PlateParams& p) {
    return oracle_spectrum(p, options.oracle, ref);
  });
  PlateParams base;
  base.material = ref.material;

  std::vector<Outcome> outcomes(options.n);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(options.n, options.workers, [&](std::size_t i) {
    Outcome& out = outcomes[i];
    const std::uint64_t sample_seed = mix_seed(options.seed, i);
    for (int attempt = 0;; ++attempt) {
      if (attempt >= kMaxSampleAttempts) {
        throw Error(ErrorCode::PerturbationInfeasible,
                    "sample " + std::to_string(i) + " could not be drawn and labelled");
      }
      const std::uint64_t s = attempt == 0 ? sample_seed : mix_seed(sample_seed, static_cast<std::uint64_t>(attempt));
      PlateParams params;
      try {
        params = perturb(base, FamilySelector::all(), options.sigma, s);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PerturbationInfeasible) throw;
        ++out.rejected;
        continue;
      }
      try {
        const ModalResult r = labeler(params);
        out.sample = {params, r.freqs_hz};
        break;
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::SelfIntersectingOutline:
          case ErrorCode::NonPositiveThickness:
          case ErrorCode::DegenerateMask:
          case ErrorCode::InvalidParams:
            ++out.rejected;
            break;
          default:
            ++out.failures;
        }
      }
    }
    const std::size_t finished = ++done;
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(finished, options.n);
    }
  });

  SampleSet set;
  set.meta.n = options.n;
  set.meta.sigma = options.sigma;
  set.meta.seed = options.seed;
  set.meta.resolution = options.oracle.resolution;
  set.samples.reserve(options.n);
  for (Outcome& o : outcomes) {
    set.samples.push_back(o.sample);
    set.meta.rejected_draws += o.rejected;
    set.meta.oracle_failures += o.failures;
  }
  if (static_cast<double>(set.meta.oracle_failures) > 0.01 * static_cast<double>(options.n)) {
    throw Error(ErrorCode::OracleFailureRate,
                std::to_string(set.meta.oracle_failures) + " oracle failures exceed 1% of the samples");
  }
  return split(std::move(set), options.seed);
}

SampleSet split(SampleSet set, std::uint64_t seed) {
  const std::size_t n = set.samples.size();
  if (n < 10) throw Error(ErrorCode::InvalidParams, "split needs at least 10 samples");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[bounded(rng, i + 1)]);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0));
  set.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  set.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  set.meta.split_seed = seed;
  return set;
}

SampleSet merge(const std::vector<SampleSet>& parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidParams, "merge needs at least one dataset");
  SampleSet out;
  out.meta = parts.front().meta;
  out.meta.rejected_draws = 0;
  out.meta.oracle_failures = 0;
  for (const SampleSet& part : parts) {
    const std::size_t offset = out.samples.size();
    out.samples.insert(out.samples.end(), part.samples.begin(), part.samples.end());
    for (std::size_t i : part.train) out.train.push_back(offset + i);
    for (std::size_t i : part.test) out.test.push_back(offset + i);
    out.meta.rejected_draws += part.meta.rejected_draws;
    out.meta.oracle_failures += part.meta.oracle_failures;
  }
  out.meta.n = out.samples.size();
  return out;
}

namespace {

nlohmann::json header_json(const SampleSet& set) {
  return {{"type", "header"},
          {"version", kFormatVersion},
          {"n", set.samples.size()},
          {"sigma", {{"outline", set.meta.sigma.outline},
                     {"thickness", set.meta.sigma.thickness},
                     {"material", set.meta.sigma.material}}},
          {"seed", set.meta.seed},
          {"split_seed", set.meta.split_seed},
          {"resolution", set.meta.resolution},
          {"rejected_draws", set.meta.rejected_draws},
          {"oracle_failures", set.meta.oracle_failures},
          {"train", set.train},
          {"test", set.test}};
}

std::string serialise(const SampleSet& set) {
  std::ostringstream os;
  os << header_json(set).dump() << '\n';
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const nlohmann::json rec = {{"type", "sample"},
                                {"index", i},
                                {"params", to_json(set.samples[i].params)},
                                {"freqs_hz", set.samples[i].freqs_hz}};
    os << rec.dump() << '\n';
  }
  return os.str();
}

}  // namespace

void save_jsonl(const SampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialise(set);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SampleSet load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  SampleSet set;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = rec.value("type", "");
    if (!have_header) {
      if (type != "header") throw Error(ErrorCode::IoError, path.string() + ": first record must be the header");
      if (rec.value("version", 0) != kFormatVersion) throw Error(ErrorCode::IoError, "unsupported dataset version");
      set.meta.n = rec.at("n").get<std::size_t>();
      set.meta.sigma = {rec.at("sigma").at("outline").get<double>(), rec.at("sigma").at("thickness").get<double>(),
                        rec.at("sigma").at("material").get<double>()};
      set.meta.seed = rec.at("seed").get<std::uint64_t>();
      set.meta.split_seed = rec.at("split_seed").get<std::uint64_t>();
      set.meta.resolution = rec.at("resolution").get<double>();
      set.meta.rejected_draws = rec.value("rejected_draws", std::size_t{0});
      set.meta.oracle_failures = rec.value("oracle_failures", std::size_t{0});
      set.train = rec.at("train").get<std::vector<std::size_t>>();
      set.test = rec.at("test").get<std::vector<std::size_t>>();
      have_header = true;
      continue;
    }
    if (type != "sample") continue;
    Sample s;
    s.params = plate_params_from_json(rec.at("params"));
    const auto& f = rec.at("freqs_hz");
    if (f.size() != kModeCount) throw Error(ErrorCode::IoError, "sample with wrong spectrum length");
    for (std::size_t i = 0; i < kModeCount; ++i) s.freqs_hz[i] = f[i].get<double>();
    set.samples.push_back(s);
  }
  if (!have_header) throw Error(ErrorCode::IoError, path.string() + ": empty dataset file");
  if (set.samples.size() != set.meta.n) throw Error(ErrorCode::IoError, "sample count does not match the header");
  for (std::size_t idx : set.train)
    if (idx >= set.samples.size()) throw Error(ErrorCode::IoError, "split index out of range");
  for (std::size_t idx : set.test)
    if (idx >= set.samples.size()) throw Error(ErrorCode::IoError, "split index out of range");
  return set;
}

std::string fingerprint(const SampleSet& set) {
  const std::string text = serialise(set);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

}  // namespace vtp
