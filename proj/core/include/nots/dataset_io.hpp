#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nots/signal.hpp"

namespace nots {

// On-disk dataset: <dir>/manifest.json + <dir>/payload.bin. Payload is
// little-endian 64-bit floats, samples x C x T signal block followed by the
// label block (samples x label_dim, label order per schema).
struct LabelField {
  std::string name;
  int dim = 0;
};

struct DatasetFile {
  std::string name;
  int channels = 0;
  int length = 0;
  std::vector<LabelField> label_schema;
  std::string generation_spec;  // JSON text describing how data was made
  std::uint64_t seed = 0;
  std::vector<LabeledSample> samples;

  int label_dim() const;
  void validate() const;
};

std::string sha256_hex(const void* data, std::size_t len);

void save_dataset(const DatasetFile& ds, const std::string& dir);
DatasetFile load_dataset(const std::string& dir);

// Checksum of the payload as stored; the deterministic 80/20 split key.
std::string dataset_checksum(const DatasetFile& ds);

// Deterministic split: indices depend only on (payload checksum, seed).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    const DatasetFile& ds, double train_fraction, std::uint64_t seed);

}  // namespace nots
