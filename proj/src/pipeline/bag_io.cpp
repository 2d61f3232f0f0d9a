#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "mammil/dataset.hpp"
#include "mammil/error.hpp"

namespace mammil {

static_assert(std::endian::native == std::endian::little, "bag I/O assumes a little-endian host");

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

void put_f32(std::vector<std::uint8_t>& out, real v) {
  const float f = static_cast<float>(v);
  std::uint8_t b[4];
  std::memcpy(b, &f, 4);
  out.insert(out.end(), b, b + 4);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

float get_f32(const std::uint8_t* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_bag(const InstanceBag& bag) {
  if (bag.features.size() != bag.num_instances * bag.dim || bag.coords.size() != bag.num_instances * 2) {
    throw DimensionError("encode_bag: bag '" + bag.bag_id + "' has inconsistent matrix sizes");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kBagHeaderBytes + 4 * (bag.features.size() + bag.coords.size()));
  out.insert(out.end(), kBagMagic, kBagMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(bag.num_instances));
  put_u32(out, static_cast<std::uint32_t>(bag.dim));
  for (real v : bag.features) put_f32(out, v);
  for (real v : bag.coords) put_f32(out, v);
  return out;
}

InstanceBag decode_bag(std::span<const std::uint8_t> bytes, std::string bag_id) {
  if (bytes.size() < kBagHeaderBytes) throw LengthError("bag header truncated", kBagHeaderBytes, bytes.size());
  if (std::memcmp(bytes.data(), kBagMagic, 4) != 0) throw FormatError("bad bag magic (expected \"MMB1\")");
  InstanceBag bag;
  bag.bag_id = std::move(bag_id);
  bag.num_instances = get_u32(bytes.data() + 4);
  bag.dim = get_u32(bytes.data() + 8);
  if (bag.num_instances == 0 || bag.dim == 0) throw FormatError("bag header declares an empty matrix");
  const std::size_t expected = kBagHeaderBytes + 4 * bag.num_instances * (bag.dim + 2);
  if (bytes.size() != expected) throw LengthError("bag payload size mismatch", expected, bytes.size());
  const std::uint8_t* p = bytes.data() + kBagHeaderBytes;
  bag.features.resize(bag.num_instances * bag.dim);
  for (auto& v : bag.features) {
    v = real(get_f32(p));
    p += 4;
  }
  bag.coords.resize(bag.num_instances * 2);
  for (auto& v : bag.coords) {
    v = real(get_f32(p));
    p += 4;
  }
  bag.validate();
  return bag;
}

void write_bag(const std::filesystem::path& path, const InstanceBag& bag) {
  const auto bytes = encode_bag(bag);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

InstanceBag load_bag(const std::filesystem::path& path, std::string bag_id) {
  const auto bytes = read_file(path);
  return decode_bag(bytes, bag_id.empty() ? path.stem().string() : std::move(bag_id));
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + name + "'");
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    const auto j = nlohmann::json::parse(in);
    m.dim = j.at("dim").get<std::size_t>();
    std::set<std::string> ids;
    for (const auto& b : j.at("bags")) {
      BagRecord r;
      r.id = b.at("id").get<std::string>();
      r.file = b.at("file").get<std::string>();
      r.split = parse_split(b.at("split").get<std::string>());
      if (b.contains("label")) {
        r.target = ClassTarget{b.at("label").get<std::size_t>()};
      } else {
        const auto ev = b.at("event").get<std::string>();
        if (ev != "observed" && ev != "censored") throw FormatError("bag '" + r.id + "': unknown event '" + ev + "'");
        r.target = SurvivalTarget{b.at("time_bin").get<std::size_t>(),
                                  ev == "observed" ? Event::observed : Event::censored};
      }
      if (!ids.insert(r.id).second) throw ValidationError("manifest: duplicate bag id '" + r.id + "'");
      m.bags.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest '") + path.string() + "': " + e.what());
  }
  for (const auto& r : m.bags) {
    const auto file = m.base_dir / r.file;
    std::ifstream bag(file, std::ios::binary);
    if (!bag) throw FormatError("manifest: bag file '" + file.string() + "' not found");
    std::uint8_t header[kBagHeaderBytes];
    bag.read(reinterpret_cast<char*>(header), kBagHeaderBytes);
    if (bag.gcount() != static_cast<std::streamsize>(kBagHeaderBytes)) {
      throw LengthError("bag header truncated in '" + file.string() + "'", kBagHeaderBytes,
                        static_cast<std::size_t>(bag.gcount()));
    }
    if (std::memcmp(header, kBagMagic, 4) != 0) throw FormatError("bad bag magic in '" + file.string() + "'");
    if (get_u32(header + 8) != m.dim) {
      throw FormatError("bag '" + r.id + "' declares dim " + std::to_string(get_u32(header + 8)) +
                        ", manifest says " + std::to_string(m.dim));
    }
  }
  return m;
}

std::string DatasetManifest::to_json_string() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : bags) {
    nlohmann::json b{{"id", r.id}, {"file", r.file.generic_string()}, {"split", split_name(r.split)}};
    if (const auto* c = std::get_if<ClassTarget>(&r.target)) {
      b["label"] = c->label;
    } else {
      const auto& s = std::get<SurvivalTarget>(r.target);
      b["time_bin"] = s.time_bin;
      b["event"] = s.event == Event::observed ? "observed" : "censored";
    }
    list.push_back(std::move(b));
  }
  return nlohmann::json{{"dim", dim}, {"bags", std::move(list)}}.dump(2) + "\n";
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest '" + path.string() + "'");
  out << to_json_string();
}

std::vector<const BagRecord*> DatasetManifest::records(Split split) const {
  std::vector<const BagRecord*> out;
  for (const auto& r : bags)
    if (r.split == split) out.push_back(&r);
  return out;
}

std::vector<InstanceBag> DatasetManifest::load_split(Split split) const {
  std::vector<InstanceBag> out;
  for (const auto* r : records(split)) {
    InstanceBag bag = load_bag(base_dir / r->file, r->id);
    if (bag.dim != dim) throw FormatError("bag '" + r->id + "' dimension differs from manifest");
    bag.target = r->target;
    out.push_back(std::move(bag));
  }
  return out;
}

}  // namespace mammil
