#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fossil/dataset.hpp"
#include "fossil/models.hpp"

namespace fossil {

// Model file layout, all integers and floats little-endian:
//   "FOSSILMF"  u32 version  u8 kind  u8 flags
//   u64 users  u64 items  u64 K  u64 L  f64 alpha
//   parameter blocks in the model's block order, row-major f64
//   (POP stores u64 counts instead)
//   user id table, item id table: u64 count, then (u64 length, bytes) each
inline constexpr std::string_view kModelMagic = "FOSSILMF";
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::uint8_t kFlagTiedTransitions = 1;

struct ModelFile {
  AnyModel model;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(bytes.data(), 8);
}
inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(bytes.data(), 4);
}
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_ids(std::ostream& out, const std::vector<std::string>& ids) {
  put_u64(out, ids.size());
  for (const auto& id : ids) {
    put_u64(out, id.size());
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("model file is truncated");
  }
  std::uint64_t u64() {
    std::array<unsigned char, 8> b;
    bytes(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32() {
    std::array<unsigned char, 4> b;
    bytes(reinterpret_cast<char*>(b.data()), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint8_t u8() {
    char c;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<std::string> ids() {
    const std::uint64_t count = u64();
    std::vector<std::string> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t len = u64();
      if (len > (1u << 20)) throw DataError("model file identifier too long");
      std::string id(len, '\0');
      bytes(id.data(), len);
      out.push_back(std::move(id));
    }
    return out;
  }

 private:
  std::istream& in_;
};

struct Shape {
  std::uint64_t users = 0, items = 0, factors = 0, order = 0;
  double alpha = 0.0;
  std::uint8_t flags = 0;
};

inline Shape shape_of(const AnyModel& model, std::size_t users, std::size_t items) {
  Shape s{users, items, 0, 0, 0.0, 0};
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FossilModel>) {
          s.factors = m.hyper().factors;
          s.order = m.hyper().order;
          s.alpha = m.hyper().alpha;
        } else if constexpr (std::is_same_v<M, FpmcModel>) {
          s.factors = m.factors();
          if (m.tied()) s.flags |= kFlagTiedTransitions;
        } else if constexpr (!std::is_same_v<M, PopModel>) {
          s.factors = m.factors();
        }
      },
      model);
  return s;
}

// Zero model of the given kind and shape, ready to receive its blocks.
inline AnyModel empty_model(ModelKind kind, const Shape& s) {
  const std::size_t U = s.users, I = s.items, K = s.factors;
  switch (kind) {
    case ModelKind::kPop:
      return PopModel{std::vector<std::uint64_t>(I, 0)};
    case ModelKind::kBprMf:
      return BprMfModel(Matrix(U, K), Matrix(I, K));
    case ModelKind::kFmc:
      return FmcModel(Matrix(I, K), Matrix(I, K));
    case ModelKind::kFpmc:
      return FpmcModel(Matrix(U, K), Matrix(I, K), Matrix(I, K), Matrix(I, K),
                       (s.flags & kFlagTiedTransitions) != 0);
    case ModelKind::kFism:
    case ModelKind::kFossil: {
      FossilHyper hyper{K, static_cast<std::size_t>(s.order), s.alpha};
      hyper.validate();
      FossilParams params{Matrix(I, 1), Matrix(I, K), Matrix(I, K), Matrix(1, hyper.order),
                          Matrix(U, hyper.order)};
      return FossilModel(hyper, std::move(params), kind == ModelKind::kFism);
    }
  }
  throw DataError("unknown model kind");
}

}  // namespace detail

inline void save_model(std::ostream& out, const ModelFile& file) {
  const ModelKind kind = kind_of(file.model);
  const auto shape = detail::shape_of(file.model, file.user_ids.size(), file.item_ids.size());
  out.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  detail::put_u32(out, kModelVersion);
  out.put(static_cast<char>(kind));
  out.put(static_cast<char>(shape.flags));
  detail::put_u64(out, shape.users);
  detail::put_u64(out, shape.items);
  detail::put_u64(out, shape.factors);
  detail::put_u64(out, shape.order);
  detail::put_f64(out, shape.alpha);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopModel>) {
          for (auto c : m.counts) detail::put_u64(out, c);
        } else {
          for (const auto& block : m.blocks()) {
            for (double v : block.values->values()) detail::put_f64(out, v);
          }
        }
      },
      file.model);
  detail::put_ids(out, file.user_ids);
  detail::put_ids(out, file.item_ids);
  if (!out) throw DataError("failed to write model file");
}

inline std::string model_to_bytes(const ModelFile& file) {
  std::ostringstream out(std::ios::binary);
  save_model(out, file);
  return out.str();
}

// Reads a model file; rejects it when `expected` is given and differs.
inline ModelFile load_model(std::istream& in,
                            std::optional<ModelKind> expected = std::nullopt) {
  detail::Reader r(in);
  std::string magic(kModelMagic.size(), '\0');
  r.bytes(magic.data(), magic.size());
  if (magic != kModelMagic) throw DataError("not a model file");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw DataError("unsupported model file version " + std::to_string(version));
  }
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(ModelKind::kFossil)) {
    throw DataError("unknown model kind tag " + std::to_string(tag));
  }
  const auto kind = static_cast<ModelKind>(tag);
  if (expected && *expected != kind) {
    throw DataError("model file holds '" + std::string(kind_name(kind)) +
                    "', expected '" + std::string(kind_name(*expected)) + "'");
  }
  detail::Shape shape;
  shape.flags = r.u8();
  shape.users = r.u64();
  shape.items = r.u64();
  shape.factors = r.u64();
  shape.order = r.u64();
  shape.alpha = r.f64();
  if (shape.users > (1ULL << 32) || shape.items > (1ULL << 32) || shape.factors > 4096 ||
      shape.order > 4096) {
    throw DataError("model file header out of range");
  }

  ModelFile file{detail::empty_model(kind, shape), {}, {}};
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopModel>) {
          for (auto& c : m.counts) c = r.u64();
        } else {
          for (auto& block : m.blocks()) {
            for (double& v : block.values->values()) v = r.f64();
            if (!all_finite(block.values->values())) {
              throw DataError("non-finite value in block '" + std::string(block.name) + "'");
            }
          }
        }
      },
      file.model);
  file.user_ids = r.ids();
  file.item_ids = r.ids();
  if (file.user_ids.size() != shape.users || file.item_ids.size() != shape.items) {
    throw DataError("identifier tables do not match the header");
  }
  return file;
}

}  // namespace fossil
