#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "levybench/container.hpp"
#include "levybench/dataset.hpp"
#include "levybench/errors.hpp"

using namespace levybench;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "levybench_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

DatasetTriple small_dataset(std::uint64_t seed = 3) {
  return generate_dataset(seed, make_bernoulli_laplace(0.8, 1.0), build_deconvolution(30, 5, 2.0), {20, 15, 10}, 30.0);
}

std::string signal_key(const Vector& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
}

}  // namespace

TEST_CASE("split sizes follow the request") {
  const auto ds = generate_dataset(1, make_laplace(1.0), build_deconvolution(20, 3, 1.0), {5000, 1000, 1000}, 30.0);
  CHECK(ds.repository.size() == 5000);
  CHECK(ds.validation.size() == 1000);
  CHECK(ds.test.size() == 1000);
  CHECK(ds.test[0].signal.size() == 20);
  CHECK(ds.test[0].measurements.size() == 18);
}

TEST_CASE("same inputs give byte-identical serializations") {
  const auto a = small_dataset();
  const auto b = small_dataset();
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  CHECK(serialize_dataset(a) != serialize_dataset(small_dataset(4)));
}

TEST_CASE("realized SNR is close to the target") {
  const auto ds = generate_dataset(7, make_bernoulli_laplace(0.8, 1.0), build_deconvolution(100, 13, 4.0), {0, 1000, 0}, 30.0);
  CHECK(std::abs(realized_snr_db(ds, {Split::Validation}) - 30.0) < 0.5);
}

TEST_CASE("repository prefix does not depend on its size") {
  const auto inst = build_deconvolution(30, 5, 2.0);
  const auto a = generate_dataset(9, make_student(3.0), inst, {10, 20, 20}, 25.0);
  const auto b = generate_dataset(9, make_student(3.0), inst, {40, 20, 20}, 25.0);
  CHECK(a.instance.noise_var == b.instance.noise_var);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.repository[i].signal == b.repository[i].signal);
    CHECK(a.repository[i].measurements == b.repository[i].measurements);
  }
}

TEST_CASE("splits use separate random streams") {
  // 1000 x 1000 validation/test pairs, none identical.
  const auto ds = generate_dataset(11, make_laplace(1.0), build_deconvolution(20, 3, 1.0), {1000, 1000, 1000}, 30.0);
  std::set<std::string> validation;
  for (const auto& e : ds.validation) validation.insert(signal_key(e.signal));
  std::size_t shared = 0;
  for (const auto& e : ds.test) shared += validation.count(signal_key(e.signal));
  for (const auto& e : ds.repository) shared += validation.count(signal_key(e.signal));
  CHECK(shared == 0);

  std::set<std::uint64_t> ids;
  for (auto p : {StreamPurpose::Signal, StreamPurpose::Noise, StreamPurpose::Chain, StreamPurpose::Operator}) {
    for (auto s : {Split::Repository, Split::Validation, Split::Test}) {
      for (std::size_t i = 0; i < 100; ++i) ids.insert(example_stream_id(p, s, i));
    }
  }
  CHECK(ids.size() == 4 * 3 * 100);
}

TEST_CASE("export and import round trip bit-exactly") {
  const auto ds = small_dataset();
  const auto path = temp_path("roundtrip.lvb");
  export_dataset(ds, path);
  const auto back = import_dataset(path);
  CHECK(back.master_seed == ds.master_seed);
  CHECK(back.instance.H == ds.instance.H);
  CHECK(back.instance.noise_var == ds.instance.noise_var);
  CHECK(back.fingerprint() == ds.fingerprint());
  for (Split s : {Split::Repository, Split::Validation, Split::Test}) {
    REQUIRE(back.split(s).size() == ds.split(s).size());
    for (std::size_t i = 0; i < ds.split(s).size(); ++i) {
      CHECK(back.split(s)[i].signal == ds.split(s)[i].signal);
      CHECK(back.split(s)[i].measurements == ds.split(s)[i].measurements);
    }
  }
  CHECK(serialize_dataset(back) == serialize_dataset(ds));
}

TEST_CASE("Fourier datasets keep their frequencies") {
  RngStream rng(2);
  const auto ds = generate_dataset(5, make_student(3.0), build_fourier_sampling(40, 8, rng), {0, 5, 5}, 30.0);
  const auto back = deserialize_dataset(serialize_dataset(ds));
  CHECK(std::get<FourierSampling>(back.instance.kind).frequencies == std::get<FourierSampling>(ds.instance.kind).frequencies);
}

TEST_CASE("truncated or corrupted containers are rejected") {
  const std::string bytes = serialize_dataset(small_dataset());
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, std::size_t{40}, bytes.size() - 1}) {
    CAPTURE(cut);
    CHECK_THROWS_AS(deserialize_dataset(bytes.substr(0, cut)), ParseError);
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_dataset(bad_magic), ParseError);
  try {
    deserialize_dataset(bytes.substr(0, bytes.size() - 8));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.location() > 0);
  }
}

TEST_CASE("unsupported versions are reported explicitly") {
  Container c = decode_container(serialize_dataset(small_dataset()));
  c.header["version"] = 99;
  CHECK_THROWS_AS(deserialize_dataset(encode_container(c)), UnsupportedVersionError);
}

TEST_CASE("tampered headers fail the fingerprint check") {
  Container c = decode_container(serialize_dataset(small_dataset()));
  c.header["noise_var"] = 123.0;
  CHECK_THROWS_AS(deserialize_dataset(encode_container(c)), ParseError);
}

TEST_CASE("atomic writes leave no partial file behind") {
  const auto path = temp_path("missing_dir") / "nested" / "x.lvb";
  CHECK_THROWS(export_dataset(small_dataset(), path));
  CHECK_FALSE(std::filesystem::exists(path));
}

TEST_CASE("CSV export has one row per example") {
  const auto ds = small_dataset();
  const auto path = temp_path("ds.csv");
  export_dataset_csv(ds, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("split,index,s1,", 0) == 0);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 45);
}
