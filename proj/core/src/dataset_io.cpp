#include "nots/dataset_io.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "nots/rng.hpp"

namespace nots {

namespace {
constexpr int kFormatVersion = 1;

std::vector<std::uint8_t> payload_bytes(const DatasetFile& ds) {
  const std::size_t per_signal = static_cast<std::size_t>(ds.channels) * ds.length;
  const std::size_t ld = static_cast<std::size_t>(ds.label_dim());
  std::vector<double> values;
  values.reserve(ds.samples.size() * (per_signal + ld));
  for (const auto& s : ds.samples)
    values.insert(values.end(), s.signal.data.begin(), s.signal.data.end());
  for (const auto& s : ds.samples)
    for (const auto& f : ds.label_schema) {
      const auto& v = s.labels.at(f.name);
      values.insert(values.end(), v.begin(), v.end());
    }
  std::vector<std::uint8_t> bytes(values.size() * sizeof(double));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  return bytes;
}

}  // namespace

int DatasetFile::label_dim() const {
  int d = 0;
  for (const auto& f : label_schema) d += f.dim;
  return d;
}

void DatasetFile::validate() const {
  if (samples.empty()) throw std::invalid_argument("dataset: sample count must be > 0");
  if (channels <= 0 || length <= 0)
    throw std::invalid_argument("dataset: C and T must be positive");
  for (const auto& s : samples) {
    if (s.signal.rank() != 2 || s.signal.rows() != channels || s.signal.cols() != length)
      throw std::invalid_argument("dataset: sample shape " + shape_str(s.signal.shape) +
                                  " does not match manifest (" + std::to_string(channels) +
                                  "," + std::to_string(length) + ")");
    for (const auto& f : label_schema) {
      auto it = s.labels.find(f.name);
      if (it == s.labels.end() || static_cast<int>(it->second.size()) != f.dim)
        throw std::invalid_argument("dataset: label '" + f.name +
                                    "' missing or wrong dimension");
    }
  }
}

std::string sha256_hex(const void* data, std::size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int dlen = 0;
  if (EVP_Digest(data, len, digest, &dlen, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(dlen * 2);
  for (unsigned int i = 0; i < dlen; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string dataset_checksum(const DatasetFile& ds) {
  auto bytes = payload_bytes(ds);
  return sha256_hex(bytes.data(), bytes.size());
}

void save_dataset(const DatasetFile& ds, const std::string& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  auto bytes = payload_bytes(ds);

  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["name"] = ds.name;
  manifest["channels"] = ds.channels;
  manifest["length"] = ds.length;
  manifest["samples"] = ds.samples.size();
  manifest["seed"] = ds.seed;
  manifest["generation_spec"] =
      ds.generation_spec.empty() ? nlohmann::json(nullptr)
                                 : nlohmann::json::parse(ds.generation_spec);
  manifest["checksum_sha256"] = sha256_hex(bytes.data(), bytes.size());
  auto& schema = manifest["label_schema"] = nlohmann::json::array();
  for (const auto& f : ds.label_schema) schema.push_back({{"name", f.name}, {"dim", f.dim}});

  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write '" + dir + "/manifest.json'");
  mf << manifest.dump(2) << "\n";

  std::ofstream pf(dir + "/payload.bin", std::ios::binary);
  if (!pf) throw std::runtime_error("cannot write '" + dir + "/payload.bin'");
  pf.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!pf) throw std::runtime_error("payload write failed");
}

DatasetFile load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot open '" + dir + "/manifest.json'");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("dataset format version mismatch");

  DatasetFile ds;
  ds.name = manifest.at("name").get<std::string>();
  ds.channels = manifest.at("channels").get<int>();
  ds.length = manifest.at("length").get<int>();
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  if (!manifest.at("generation_spec").is_null())
    ds.generation_spec = manifest.at("generation_spec").dump();
  for (const auto& f : manifest.at("label_schema"))
    ds.label_schema.push_back({f.at("name").get<std::string>(), f.at("dim").get<int>()});
  const std::size_t count = manifest.at("samples").get<std::size_t>();
  if (count == 0) throw std::runtime_error("dataset: manifest sample count is 0");

  std::ifstream pf(dir + "/payload.bin", std::ios::binary | std::ios::ate);
  if (!pf) throw std::runtime_error("cannot open '" + dir + "/payload.bin'");
  const std::size_t actual = static_cast<std::size_t>(pf.tellg());
  const std::size_t per_signal = static_cast<std::size_t>(ds.channels) * ds.length;
  const std::size_t expected =
      sizeof(double) * count * (per_signal + static_cast<std::size_t>(ds.label_dim()));
  if (actual != expected)
    throw std::runtime_error("dataset: payload is " + std::to_string(actual) +
                             " bytes, manifest implies " + std::to_string(expected));
  std::vector<std::uint8_t> bytes(actual);
  pf.seekg(0);
  pf.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(actual));
  if (!pf) throw std::runtime_error("payload read failed");

  const std::string sum = sha256_hex(bytes.data(), bytes.size());
  if (sum != manifest.at("checksum_sha256").get<std::string>())
    throw std::runtime_error("dataset: payload checksum mismatch");

  std::vector<double> values(bytes.size() / sizeof(double));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  std::size_t off = 0;
  ds.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.samples[i].signal = Signal({ds.channels, ds.length},
                                  std::vector<double>(values.begin() + off,
                                                      values.begin() + off + per_signal));
    off += per_signal;
  }
  for (std::size_t i = 0; i < count; ++i)
    for (const auto& f : ds.label_schema) {
      ds.samples[i].labels[f.name] =
          std::vector<double>(values.begin() + off, values.begin() + off + f.dim);
      off += f.dim;
    }
  ds.validate();
  return ds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    const DatasetFile& ds, double train_fraction, std::uint64_t seed) {
  const std::string sum = dataset_checksum(ds);
  std::uint64_t key = seed;
  for (char c : sum) key = key * 131 + static_cast<unsigned char>(c);
  Rng rng(key);
  std::vector<std::size_t> idx(ds.samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.below(i + 1)]);
  const std::size_t ntrain =
      static_cast<std::size_t>(train_fraction * static_cast<double>(idx.size()));
  std::vector<std::size_t> train(idx.begin(), idx.begin() + ntrain);
  std::vector<std::size_t> test(idx.begin() + ntrain, idx.end());
  return {train, test};
}

}  // namespace nots
