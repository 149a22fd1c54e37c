#include "nlhom/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace nlhom {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'N', 'L', 'H', 'F'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw InputError("field dump: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

void write_field_binary(std::ostream& out, const Field& f) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, std::uint32_t(f.n()));
  put_le<std::uint32_t>(out, std::uint32_t(f.components()));
  for (Index i = 0; i < f.size(); ++i) put_le<double>(out, f.data()[i]);
}

Field read_field_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw InputError("field dump: bad magic, expected NLHF");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw InputError("field dump: unsupported version " + std::to_string(version));
  const auto n = get_le<std::uint32_t>(in);
  const auto c = get_le<std::uint32_t>(in);
  if (n == 0 || c == 0) throw InputError("field dump: empty grid");
  Field f(static_cast<int>(n), static_cast<int>(c));
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = get_le<double>(in);
  return f;
}

void save_field_binary(const std::string& path, const Field& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_field_binary(out, f);
}

Field load_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_field_binary(in);
}

void write_field_csv(std::ostream& out, const Field& f) {
  out << "i1,i2,i3,comp,value\n";
  for (Index s = 0; s < f.sites(); ++s) {
    const Eigen::Vector3i i = f.coords(s);
    for (int k = 0; k < f.components(); ++k)
      out << i.x() << ',' << i.y() << ',' << i.z() << ',' << k << ',' << format_double(f(s, k)) << '\n';
  }
}

}  // namespace nlhom
