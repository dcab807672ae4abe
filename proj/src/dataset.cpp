#include "levybench/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "levybench/container.hpp"
#include "levybench/errors.hpp"
#include "levybench/parallel.hpp"

namespace levybench {

namespace {

constexpr const char* kDatasetFormat = "levybench-dataset";

const char* split_name(Split s) {
  switch (s) {
    case Split::Repository:
      return "repository";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "?";
}

std::vector<Example> generate_split(std::uint64_t seed, const IdDistribution& dist, Split split, std::size_t count,
                                    std::size_t length) {
  std::vector<Example> out(count);
  parallel_for(count, [&](std::size_t i) {
    RngStream rng(seed, example_stream_id(StreamPurpose::Signal, split, i));
    out[i].signal = generate_signal(rng, dist, length).signal;
  });
  return out;
}

void add_noise(std::uint64_t seed, const ProblemInstance& inst, Split split, std::vector<Example>& examples) {
  parallel_for(examples.size(), [&](std::size_t i) {
    RngStream rng(seed, example_stream_id(StreamPurpose::Noise, split, i));
    examples[i].measurements = simulate_measurements(rng, inst, examples[i].signal);
  });
}

nlohmann::json operator_to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["kind"] = operator_name(inst.kind);
  if (const auto* d = std::get_if<Deconvolution>(&inst.kind)) {
    j["kind"] = "deconvolution";
    j["psf_variance"] = d->psf_variance;
    j["psf"] = std::vector<double>(d->psf.data(), d->psf.data() + d->psf.size());
  } else if (const auto* f = std::get_if<FourierSampling>(&inst.kind)) {
    j["kind"] = "fourier";
    j["frequencies"] = f->frequencies;
  } else {
    j["kind"] = "custom";
    j["label"] = std::get<CustomOperator>(inst.kind).label;
  }
  j["rows"] = inst.H.rows();
  j["cols"] = inst.H.cols();
  return j;
}

OperatorKind operator_kind_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "deconvolution") {
    const auto taps = j.at("psf").get<std::vector<double>>();
    return Deconvolution{Eigen::Map<const Vector>(taps.data(), static_cast<Eigen::Index>(taps.size())),
                         j.at("psf_variance").get<double>()};
  }
  if (kind == "fourier") return FourierSampling{j.at("frequencies").get<std::vector<std::size_t>>()};
  if (kind == "custom") return CustomOperator{j.at("label").get<std::string>()};
  throw ParseError("unknown operator kind '" + kind + "'", 0);
}

}  // namespace

std::uint64_t example_stream_id(StreamPurpose purpose, Split split, std::size_t index) {
  const auto domain = static_cast<std::uint16_t>((static_cast<unsigned>(purpose) << 8) | static_cast<unsigned>(split));
  return make_stream_id(domain, index);
}

const std::vector<Example>& DatasetTriple::split(Split s) const {
  switch (s) {
    case Split::Repository:
      return repository;
    case Split::Validation:
      return validation;
    case Split::Test:
      return test;
  }
  throw ParameterError("unknown split");
}

std::string DatasetTriple::fingerprint() const { return hex64(fnv1a64(dataset_header(*this).dump())); }

DatasetTriple generate_dataset(std::uint64_t master_seed, const IdDistribution& dist, ProblemInstance inst,
                               const DatasetSizes& sizes, std::optional<double> target_snr_db) {
  validate(dist);
  const auto length = static_cast<std::size_t>(inst.signal_length());
  DatasetTriple ds;
  ds.master_seed = master_seed;
  ds.distribution = dist;
  ds.target_snr_db = target_snr_db;
  ds.repository = generate_split(master_seed, dist, Split::Repository, sizes.repository, length);
  ds.validation = generate_split(master_seed, dist, Split::Validation, sizes.validation, length);
  ds.test = generate_split(master_seed, dist, Split::Test, sizes.test, length);

  if (target_snr_db) {
    std::vector<Vector> calibration;
    for (const auto* split : {&ds.validation, &ds.test}) {
      for (const auto& e : *split) calibration.push_back(e.signal);
    }
    if (calibration.empty()) {
      for (const auto& e : ds.repository) calibration.push_back(e.signal);
    }
    inst.noise_var = calibrate_noise(inst.H, calibration, *target_snr_db);
  }
  ds.instance = std::move(inst);
  add_noise(master_seed, ds.instance, Split::Repository, ds.repository);
  add_noise(master_seed, ds.instance, Split::Validation, ds.validation);
  add_noise(master_seed, ds.instance, Split::Test, ds.test);
  return ds;
}

double realized_snr_db(const DatasetTriple& ds, const std::vector<Split>& splits) {
  std::vector<Vector> signals;
  std::vector<Vector> measurements;
  for (Split s : splits) {
    for (const auto& e : ds.split(s)) {
      signals.push_back(e.signal);
      measurements.push_back(e.measurements);
    }
  }
  return realized_snr_db(ds.instance.H, signals, measurements);
}

nlohmann::json distribution_to_json(const IdDistribution& dist) {
  nlohmann::json j;
  if (const auto* g = std::get_if<GaussianIncrements>(&dist)) {
    j["model"] = "gaussian";
    j["variance"] = g->variance;
  } else if (const auto* l = std::get_if<LaplaceIncrements>(&dist)) {
    j["model"] = "laplace";
    j["b"] = l->b;
  } else if (const auto* bl = std::get_if<BernoulliLaplaceIncrements>(&dist)) {
    j["model"] = "bernoulli_laplace";
    j["lambda"] = bl->lambda;
    j["b"] = bl->b;
  } else {
    j["model"] = "student";
    j["alpha"] = std::get<StudentIncrements>(dist).alpha;
  }
  return j;
}

IdDistribution distribution_from_json(const nlohmann::json& j) {
  const auto model = j.at("model").get<std::string>();
  if (model == "gaussian") return make_gaussian(j.at("variance").get<double>());
  if (model == "laplace") return make_laplace(j.at("b").get<double>());
  if (model == "bernoulli_laplace") return make_bernoulli_laplace(j.at("lambda").get<double>(), j.at("b").get<double>());
  if (model == "student") return make_student(j.at("alpha").get<double>());
  throw ParseError("unknown distribution model '" + model + "'", 0);
}

nlohmann::json dataset_header(const DatasetTriple& ds) {
  nlohmann::json h;
  h["format"] = kDatasetFormat;
  h["version"] = kContainerVersion;
  h["master_seed"] = ds.master_seed;
  h["distribution"] = distribution_to_json(ds.distribution);
  h["operator"] = operator_to_json(ds.instance);
  h["noise_var"] = ds.instance.noise_var;
  h["target_snr_db"] = ds.target_snr_db ? nlohmann::json(*ds.target_snr_db) : nlohmann::json(nullptr);
  h["signal_length"] = ds.instance.signal_length();
  h["measurements"] = ds.instance.measurements();
  h["splits"] = {{"repository", ds.repository.size()}, {"validation", ds.validation.size()}, {"test", ds.test.size()}};
  h["layout"] = "H row-major; then repository, validation, test; each example signal[K] then measurements[M]";
  return h;
}

std::string serialize_dataset(const DatasetTriple& ds) {
  Container c;
  c.header = dataset_header(ds);
  c.header["fingerprint"] = ds.fingerprint();
  const Eigen::Index m = ds.instance.measurements();
  const Eigen::Index k = ds.instance.signal_length();
  const std::size_t examples = ds.repository.size() + ds.validation.size() + ds.test.size();
  c.payload.reserve(static_cast<std::size_t>(m * k) + examples * static_cast<std::size_t>(m + k));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) c.payload.push_back(ds.instance.H(i, j));
  }
  for (const auto* split : {&ds.repository, &ds.validation, &ds.test}) {
    for (const auto& e : *split) {
      c.payload.insert(c.payload.end(), e.signal.data(), e.signal.data() + e.signal.size());
      c.payload.insert(c.payload.end(), e.measurements.data(), e.measurements.data() + e.measurements.size());
    }
  }
  return encode_container(c);
}

DatasetTriple deserialize_dataset(const std::string& bytes) {
  Container c = decode_container(bytes);
  const auto& h = c.header;
  if (h.value("format", std::string()) != kDatasetFormat) throw ParseError("not a dataset container", 16);

  DatasetTriple ds;
  try {
    ds.master_seed = h.at("master_seed").get<std::uint64_t>();
    ds.distribution = distribution_from_json(h.at("distribution"));
    const auto m = h.at("measurements").get<Eigen::Index>();
    const auto k = h.at("signal_length").get<Eigen::Index>();
    const auto& splits = h.at("splits");
    const std::size_t counts[3] = {splits.at("repository").get<std::size_t>(), splits.at("validation").get<std::size_t>(),
                                   splits.at("test").get<std::size_t>()};
    const std::size_t expected =
        static_cast<std::size_t>(m * k) + (counts[0] + counts[1] + counts[2]) * static_cast<std::size_t>(m + k);
    if (c.payload.size() != expected) throw ParseError("payload size does not match header dimensions", 16);

    std::size_t pos = 0;
    Matrix H(m, k);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) H(i, j) = c.payload[pos++];
    }
    ds.instance = ProblemInstance{std::move(H), operator_kind_from_json(h.at("operator")), h.at("noise_var").get<double>()};
    if (!h.at("target_snr_db").is_null()) ds.target_snr_db = h.at("target_snr_db").get<double>();

    std::vector<Example>* targets[3] = {&ds.repository, &ds.validation, &ds.test};
    for (int s = 0; s < 3; ++s) {
      targets[s]->resize(counts[s]);
      for (auto& e : *targets[s]) {
        e.signal = Eigen::Map<const Vector>(c.payload.data() + pos, k);
        pos += static_cast<std::size_t>(k);
        e.measurements = Eigen::Map<const Vector>(c.payload.data() + pos, m);
        pos += static_cast<std::size_t>(m);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid dataset header: ") + e.what(), 16);
  } catch (const ParameterError& e) {
    throw ParseError(std::string("invalid dataset header: ") + e.what(), 16);
  }
  if (h.contains("fingerprint") && h["fingerprint"] != ds.fingerprint()) {
    throw ParseError("fingerprint does not match header contents", 16);
  }
  return ds;
}

void export_dataset(const DatasetTriple& ds, const std::filesystem::path& path) {
  write_file_atomically(path, serialize_dataset(ds));
}

DatasetTriple import_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_dataset(bytes);
}

void export_dataset_csv(const DatasetTriple& ds, const std::filesystem::path& path) {
  std::string text = "split,index";
  for (Eigen::Index k = 1; k <= ds.instance.signal_length(); ++k) text += ",s" + std::to_string(k);
  for (Eigen::Index m = 1; m <= ds.instance.measurements(); ++m) text += ",y" + std::to_string(m);
  text += '\n';
  char buf[32];
  for (Split s : {Split::Repository, Split::Validation, Split::Test}) {
    const auto& examples = ds.split(s);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      text += split_name(s);
      text += ',' + std::to_string(i);
      for (const Vector* v : {&examples[i].signal, &examples[i].measurements}) {
        for (Eigen::Index j = 0; j < v->size(); ++j) {
          std::snprintf(buf, sizeof(buf), ",%.17g", (*v)(j));
          text += buf;
        }
      }
      text += '\n';
    }
  }
  write_file_atomically(path, text);
}

}  // namespace levybench
