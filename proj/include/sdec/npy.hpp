#pragma once

// Reader/writer for 2-D arrays in the NPY v1.0 format.
//
// Reading accepts little-endian float32 ('<f4') or float64 ('<f8') data in C
// order and widens to double. Writing always emits '<f8' with exactly the
// header numpy.save produces, so files are byte-identical to numpy's.

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sdec::npy {

/// Parse an in-memory NPY image.
Eigen::MatrixXd decode(std::string_view bytes);

/// Serialize as NPY v1.0, '<f8', C order. Throws ShapeNotTwoDim when empty.
std::string encode(const Eigen::MatrixXd& m);

/// Throws FileNotFound, BadMagic, UnsupportedVersion, UnsupportedDtype,
/// FortranOrderUnsupported, ShapeNotTwoDim or IoError.
Eigen::MatrixXd load_array(const std::filesystem::path& path);

void save_array(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace sdec::npy
