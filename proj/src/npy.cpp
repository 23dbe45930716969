#include "sdec/npy.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>
#include <vector>

#include "sdec/errors.hpp"

namespace sdec::npy {
namespace {

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleV1 = 10;  // magic + version + uint16 length
constexpr std::size_t kAlign = 64;
// numpy leaves room for the leading axis to grow to this many digits.
constexpr std::size_t kGrowthAxisMaxDigits = 21;

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::vector<long long> parse_shape(const std::string& inner) {
  std::vector<long long> dims;
  std::stringstream ss(inner);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto first = part.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = part.find_last_not_of(" \tL");
    const std::string token = part.substr(first, last - first + 1);
    if (token.empty() ||
        token.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::kShapeNotTwoDim, "malformed shape entry '" + token + "'");
    }
    dims.push_back(std::stoll(token));
  }
  return dims;
}

}  // namespace

Eigen::MatrixXd decode(std::string_view bytes) {
  if (bytes.size() < kPreambleV1 ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "missing \\x93NUMPY magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "NPY version " + std::to_string(major) + "." +
                    std::to_string(minor) + " (only 1.0 is supported)");
  }
  const std::size_t header_len = read_le<std::uint16_t>(bytes.data() + 8);
  if (bytes.size() < kPreambleV1 + header_len) {
    throw Error(ErrorCode::kIoError, "truncated NPY header");
  }
  const std::string header(bytes.substr(kPreambleV1, header_len));

  static const std::regex descr_re(R"(['"]descr['"]\s*:\s*['"]([^'"]*)['"])");
  static const std::regex fortran_re(R"(['"]fortran_order['"]\s*:\s*(True|False))");
  static const std::regex shape_re(R"(['"]shape['"]\s*:\s*\(([^)]*)\))");
  std::smatch m;

  if (!std::regex_search(header, m, descr_re)) {
    throw Error(ErrorCode::kUnsupportedDtype, "header lacks a descr entry");
  }
  const std::string descr = m[1];
  std::size_t item_size = 0;
  if (descr == "<f8") {
    item_size = 8;
  } else if (descr == "<f4") {
    item_size = 4;
  } else {
    throw Error(ErrorCode::kUnsupportedDtype,
                "dtype '" + descr + "' (expected '<f4' or '<f8')");
  }

  if (!std::regex_search(header, m, fortran_re)) {
    throw Error(ErrorCode::kFortranOrderUnsupported,
                "header lacks a fortran_order entry");
  }
  if (m[1] == "True") {
    throw Error(ErrorCode::kFortranOrderUnsupported,
                "Fortran-ordered arrays are not supported");
  }

  if (!std::regex_search(header, m, shape_re)) {
    throw Error(ErrorCode::kShapeNotTwoDim, "header lacks a shape entry");
  }
  const std::vector<long long> dims = parse_shape(m[1]);
  if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1) {
    throw Error(ErrorCode::kShapeNotTwoDim,
                "shape (" + std::string(m[1]) + ") is not a non-empty 2-D shape");
  }

  const auto rows = static_cast<Eigen::Index>(dims[0]);
  const auto cols = static_cast<Eigen::Index>(dims[1]);
  const std::size_t count = static_cast<std::size_t>(rows * cols);
  const char* data = bytes.data() + kPreambleV1 + header_len;
  if (bytes.size() - kPreambleV1 - header_len < count * item_size) {
    throw Error(ErrorCode::kIoError, "NPY payload shorter than its shape");
  }

  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::size_t k = static_cast<std::size_t>(i * cols + j) * item_size;
      out(i, j) = item_size == 8 ? read_le<double>(data + k)
                                 : static_cast<double>(read_le<float>(data + k));
    }
  }
  return out;
}

std::string encode(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(ErrorCode::kShapeNotTwoDim, "refusing to write an empty array");
  }
  const std::string rows = std::to_string(m.rows());
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       rows + ", " + std::to_string(m.cols()) + "), }";
  header.append(kGrowthAxisMaxDigits - rows.size(), ' ');
  const std::size_t hlen = header.size() + 1;
  const std::size_t pad = kAlign - ((kPreambleV1 + hlen) % kAlign);
  header.append(pad, ' ');
  header.push_back('\n');

  std::string out(kMagic.begin(), kMagic.end());
  out.push_back('\x01');
  out.push_back('\x00');
  append_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out += header;
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) append_le<double>(out, m(i, j));
  }
  return out;
}

Eigen::MatrixXd load_array(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kFileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed: " + path.string());
  return decode(bytes);
}

void save_array(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  const std::string bytes = encode(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

}  // namespace sdec::npy
