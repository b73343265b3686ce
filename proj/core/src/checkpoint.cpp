#include "autocl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "autocl/error.hpp"

namespace autocl {
namespace {

constexpr std::array<char, 8> kMagic{'A', 'U', 'T', 'O', 'C', 'L', 'C', 'K'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return to_little(v);
}

}  // namespace

void write_container(const std::filesystem::path& path, const std::string& kind, const nlohmann::json& meta,
                     const std::vector<NamedTensor>& arrays) {
  nlohmann::json header{{"kind", kind}, {"meta", meta}, {"arrays", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    header["arrays"].push_back({{"name", a.name}, {"shape", a.value.shape()}, {"offset", offset}});
    offset += a.value.size() * sizeof(double);
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays)
    for (double v : a.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + " is not an autocl checkpoint");
  const std::uint64_t len = get_u64(in);
  if (!in || len > (std::uint64_t{1} << 32)) throw DataError("corrupt checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header");

  Container c;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    c.kind = header.at("kind").get<std::string>();
    c.meta = header.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }
  const std::streampos data_start = in.tellg();
  for (const auto& entry : header.at("arrays")) {
    NamedTensor a;
    a.name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = std::bit_cast<double>(get_u64(in));
    if (!in) throw DataError("truncated checkpoint data for " + a.name);
    a.value = Tensor(shape, std::move(data));
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void save_encoder(const std::filesystem::path& path, const EncoderParams& params) {
  std::vector<NamedTensor> arrays{{"in_w", params.in_w}, {"in_b", params.in_b}};
  for (std::size_t i = 0; i < params.conv_w.size(); ++i) {
    arrays.push_back({"conv_w." + std::to_string(i), params.conv_w[i]});
    arrays.push_back({"conv_b." + std::to_string(i), params.conv_b[i]});
  }
  arrays.push_back({"out_w", params.out_w});
  arrays.push_back({"out_b", params.out_b});
  write_container(path, "encoder", nlohmann::json{{"config", params.config}}, arrays);
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "encoder") throw DataError(path.string() + " holds a " + c.kind + ", not an encoder");
  EncoderParams p = init_encoder(c.meta.at("config").get<EncoderConfig>(), 0);
  auto targets = p.tensors();
  if (targets.size() != c.arrays.size()) throw DataError("encoder checkpoint has the wrong number of arrays");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i]->shape() != c.arrays[i].value.shape())
      throw DataError("encoder checkpoint array " + c.arrays[i].name + " has shape " +
                      shape_string(c.arrays[i].value.shape()));
    *targets[i] = std::move(c.arrays[i].value);
  }
  return p;
}

}  // namespace autocl
