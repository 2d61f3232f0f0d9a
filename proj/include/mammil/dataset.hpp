#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mammil/wsi_graph.hpp"

namespace mammil {

// Bag file layout, little-endian:
//   "MMB1" | u32 M | u32 D | M·D float32 features | M·2 float32 coordinates
inline constexpr char kBagMagic[4] = {'M', 'M', 'B', '1'};
inline constexpr std::size_t kBagHeaderBytes = 12;

std::vector<std::uint8_t> encode_bag(const InstanceBag& bag);
/// Parses a bag payload. Throws FormatError on a bad magic and LengthError
/// when the payload size disagrees with the header.
InstanceBag decode_bag(std::span<const std::uint8_t> bytes, std::string bag_id = {});

void write_bag(const std::filesystem::path& path, const InstanceBag& bag);
InstanceBag load_bag(const std::filesystem::path& path, std::string bag_id = {});

enum class Split { train, val, test };
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct BagRecord {
  std::string id;
  std::filesystem::path file;  // relative to the manifest directory
  Split split = Split::train;
  std::variant<ClassTarget, SurvivalTarget> target;
};

/// JSON manifest: {"dim": D, "bags": [{"id", "file", "split", "label" | "time_bin" + "event"}]}.
struct DatasetManifest {
  std::size_t dim = 0;
  std::vector<BagRecord> bags;
  std::filesystem::path base_dir;

  /// Parses and validates: unique ids, files present, headers declare `dim`.
  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string to_json_string() const;

  std::vector<const BagRecord*> records(Split split) const;
  /// Loads every bag of a split with its target attached.
  std::vector<InstanceBag> load_split(Split split) const;
};

}  // namespace mammil
