#include "aslfit/nifti.hpp"

#include "aslfit/errors.hpp"
#include "aslfit/units.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "only little-endian hosts are supported");

namespace asl {

namespace {

using json = nlohmann::json;

#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope, scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kFloat32 = 16;

NiftiHeader make_header(Grid g, int n_frames)
{
    NiftiHeader h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = n_frames > 0 ? 4 : 3;
    h.dim[1] = static_cast<std::int16_t>(g.ni);
    h.dim[2] = static_cast<std::int16_t>(g.nj);
    h.dim[3] = static_cast<std::int16_t>(g.nk);
    h.dim[4] = static_cast<std::int16_t>(n_frames > 0 ? n_frames : 1);
    for (int d = 5; d < 8; ++d)
        h.dim[d] = 1;
    h.datatype = kFloat32;
    h.bitpix = 32;
    for (int d = 0; d < 8; ++d)
        h.pixdim[d] = 1.0f;
    h.pixdim[1] = h.pixdim[2] = h.pixdim[3] = 3.0f; // mm, 3 mm isotropic
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.xyzt_units = 2 | 8; // mm, seconds
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_payload(const std::string &path, const NiftiHeader &h, const double *data,
                   std::size_t n)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char *>(&h), sizeof(h));
    const char ext[4] = {0, 0, 0, 0};
    f.write(ext, 4);
    std::vector<float> buf(n);
    for (std::size_t i = 0; i < n; ++i)
        buf[i] = static_cast<float>(data[i]);
    f.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(4 * n));
    if (!f)
        throw IoError("short write: " + path);
}

NiftiHeader read_header(std::ifstream &f, const std::string &path)
{
    NiftiHeader h{};
    f.read(reinterpret_cast<char *>(&h), sizeof(h));
    if (!f)
        throw IoError("truncated NIfTI header: " + path, f.gcount());
    if (h.sizeof_hdr != 348)
        throw IoError("not a little-endian NIfTI-1 file (sizeof_hdr != 348): " + path, 0);
    if (std::memcmp(h.magic, "n+1", 3) != 0)
        throw IoError("bad NIfTI magic: " + path, offsetof(NiftiHeader, magic));
    if (h.datatype != kFloat32 || h.bitpix != 32)
        throw IoError("unsupported datatype (only float32 is implemented): " + path,
                      offsetof(NiftiHeader, datatype));
    if (h.dim[0] < 3 || h.dim[0] > 4)
        throw IoError("unsupported dimensionality: " + path, offsetof(NiftiHeader, dim));
    if (h.dim[1] <= 0 || h.dim[2] <= 0 || h.dim[3] <= 0 || (h.dim[0] == 4 && h.dim[4] <= 0))
        throw IoError("non-positive dimensions: " + path, offsetof(NiftiHeader, dim));
    if (h.vox_offset < 348.0f)
        throw IoError("invalid vox_offset: " + path, offsetof(NiftiHeader, vox_offset));
    return h;
}

std::vector<float> read_payload(std::ifstream &f, const NiftiHeader &h, std::size_t n,
                                const std::string &path)
{
    f.seekg(static_cast<std::streamoff>(h.vox_offset));
    std::vector<float> buf(n);
    f.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(4 * n));
    if (static_cast<std::size_t>(f.gcount()) != 4 * n)
        throw IoError("payload shorter than header dim field promises: " + path,
                      static_cast<long long>(h.vox_offset) + f.gcount());
    return buf;
}

} // namespace

void write_volume_nifti(const std::string &path, const Volume &vol)
{
    if (!vol.grid.valid())
        throw std::invalid_argument("write_volume_nifti: empty volume");
    write_payload(path, make_header(vol.grid, 0), vol.data.data(), vol.size());
}

Volume read_volume_nifti(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open: " + path);
    const NiftiHeader h = read_header(f, path);
    if (h.dim[0] != 3 && !(h.dim[0] == 4 && h.dim[4] == 1))
        throw IoError("expected a 3-D volume: " + path, offsetof(NiftiHeader, dim));
    Grid g{h.dim[1], h.dim[2], h.dim[3]};
    const auto buf = read_payload(f, h, g.nvox(), path);
    Volume out(g);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = buf[i];
    return out;
}

void write_series_nifti(const std::string &path, const Series &s)
{
    if (!s.grid.valid() || s.n_frames <= 0)
        throw std::invalid_argument("write_series_nifti: empty series");
    // voxel-major in memory -> frame-major on disk
    const std::size_t nvox = s.nvox();
    std::vector<double> frame_major(nvox * s.n_frames);
    for (std::size_t v = 0; v < nvox; ++v)
        for (int n = 0; n < s.n_frames; ++n)
            frame_major[static_cast<std::size_t>(n) * nvox + v] = s.at(v, n);
    write_payload(path, make_header(s.grid, s.n_frames), frame_major.data(), frame_major.size());
}

Series read_series_nifti(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open: " + path);
    const NiftiHeader h = read_header(f, path);
    if (h.dim[0] != 4)
        throw IoError("expected a 4-D series: " + path, offsetof(NiftiHeader, dim));
    Grid g{h.dim[1], h.dim[2], h.dim[3]};
    const int nd = h.dim[4];
    const auto buf = read_payload(f, h, g.nvox() * nd, path);
    Series out(g, nd);
    const std::size_t nvox = g.nvox();
    for (std::size_t v = 0; v < nvox; ++v)
        for (int n = 0; n < nd; ++n)
            out.at(v, n) = buf[static_cast<std::size_t>(n) * nvox + v];
    return out;
}

void write_sidecar(const std::string &path, const Protocol &proto)
{
    json j;
    j["t_ms"] = json::array();
    j["tau_ms"] = json::array();
    for (double t : proto.t)
        j["t_ms"].push_back(units::s_to_ms(t));
    for (double tau : proto.tau)
        j["tau_ms"].push_back(units::s_to_ms(tau));
    j["alpha"] = proto.alpha;
    j["lambda_ml_per_g"] = proto.lambda;
    j["t1_ms"] = units::s_to_ms(proto.t1);
    j["t1b_ms"] = units::s_to_ms(proto.t1b);
    j["units"] = {{"cbf", "ml/100g/min"}, {"att", "s"}, {"time", "ms"}};
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
    if (!f)
        throw IoError("short write: " + path);
}

Protocol read_sidecar(const std::string &path, Volume m0)
{
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open sidecar: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception &e) {
        throw IoError(std::string("malformed sidecar JSON: ") + e.what());
    }
    Protocol p;
    try {
        for (double t : j.at("t_ms"))
            p.t.push_back(units::ms_to_s(t));
        for (double tau : j.at("tau_ms"))
            p.tau.push_back(units::ms_to_s(tau));
        p.alpha = j.at("alpha").get<double>();
        p.lambda = j.at("lambda_ml_per_g").get<double>();
        p.t1 = units::ms_to_s(j.at("t1_ms").get<double>());
        p.t1b = units::ms_to_s(j.at("t1b_ms").get<double>());
    } catch (const json::exception &e) {
        throw IoError(std::string("sidecar missing required field: ") + e.what());
    }
    p.m0 = std::move(m0);
    p.validate();
    return p;
}

Series quantize_f32(const Series &s)
{
    Series out = s;
    for (double &x : out.data)
        x = f32(x);
    return out;
}

} // namespace asl
