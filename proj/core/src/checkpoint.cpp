#include "varprec/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace varprec::checkpoint {

namespace {

constexpr char kMagic[8] = {'V', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_record(std::ostream& out, const std::string& name, Record::Kind kind,
                  const nd::Shape& shape, std::span<const double> values) {
  write_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(kind));
  write_u64(out, shape.size());
  for (auto d : shape) write_u64(out, static_cast<std::uint64_t>(d));
  write_u64(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

const Record* Container::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

void save(const std::string& path, const std::string& manifest_json, const nd::ParamStore& store,
          const std::vector<std::pair<std::string, nd::Tensor>>& extras) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, manifest_json.size());
  out.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));
  std::uint64_t count = store.entries().size() + store.buffers().size() + extras.size();
  write_u64(out, count);
  for (const auto& e : store.entries())
    write_record(out, e.name, Record::Kind::Param, e.tensor.shape(), e.tensor.values());
  for (const auto& [name, buf] : store.buffers())
    write_record(out, name, Record::Kind::Buffer, {static_cast<std::int64_t>(buf->size())}, *buf);
  for (const auto& [name, t] : extras) write_record(out, name, Record::Kind::Extra, t.shape(), t.values());
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Container load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint container");
  Container c;
  const auto mlen = read_u64(in);
  c.manifest_json.resize(mlen);
  in.read(c.manifest_json.data(), static_cast<std::streamsize>(mlen));
  const auto count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    Record r;
    const auto nlen = read_u64(in);
    r.name.resize(nlen);
    in.read(r.name.data(), static_cast<std::streamsize>(nlen));
    r.kind = static_cast<Record::Kind>(in.get());
    const auto ndim = read_u64(in);
    for (std::uint64_t d = 0; d < ndim; ++d) r.shape.push_back(static_cast<std::int64_t>(read_u64(in)));
    const auto vlen = read_u64(in);
    r.values.resize(vlen);
    in.read(reinterpret_cast<char*>(r.values.data()),
            static_cast<std::streamsize>(vlen * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated record in '" + path + "'");
    c.records.push_back(std::move(r));
  }
  return c;
}

void restore_into(nd::ParamStore& store, const Container& c) {
  for (auto& e : store.entries()) {
    const Record* r = c.find(e.name);
    if (!r || r->kind != Record::Kind::Param)
      throw std::runtime_error("checkpoint: missing parameter record '" + e.name + "'");
    if (r->values.size() != static_cast<std::size_t>(e.tensor.size()))
      throw std::runtime_error("checkpoint: size mismatch for parameter '" + e.name + "'");
    auto dst = e.tensor.mutable_values();
    std::copy(r->values.begin(), r->values.end(), dst.begin());
  }
  for (const auto& [name, buf] : store.buffers()) {
    const Record* r = c.find(name);
    if (!r || r->kind != Record::Kind::Buffer)
      throw std::runtime_error("checkpoint: missing buffer record '" + name + "'");
    if (r->values.size() != buf->size())
      throw std::runtime_error("checkpoint: size mismatch for buffer '" + name + "'");
    *buf = r->values;
  }
}

}  // namespace varprec::checkpoint
