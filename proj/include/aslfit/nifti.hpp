// nifti.hpp — minimal NIfTI-1 single-file I/O (348-byte header, float32
// little-endian payload) plus the JSON protocol sidecar.
#pragma once

#include "aslfit/model.hpp"
#include "aslfit/volume.hpp"

#include <string>

namespace asl {

void write_volume_nifti(const std::string &path, const Volume &vol);
Volume read_volume_nifti(const std::string &path);

// 4-D series; file layout is frame-major (x fastest, t slowest).
void write_series_nifti(const std::string &path, const Series &s);
Series read_series_nifti(const std::string &path);

// Sidecar carries timing in milliseconds plus the model constants; the m0
// volume travels separately and is attached on load.
void write_sidecar(const std::string &path, const Protocol &proto);
Protocol read_sidecar(const std::string &path, Volume m0);

// Round values through float32, what one write/read cycle does to a payload.
inline double f32(double x) { return static_cast<double>(static_cast<float>(x)); }
Series quantize_f32(const Series &s);

} // namespace asl
