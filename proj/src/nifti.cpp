#include "nunet/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace nunet {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

// Byte offsets of the header fields.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffMagic = 344;

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off)
{
  return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 | std::uint32_t(b[off + 2]) << 16 |
         std::uint32_t(b[off + 3]) << 24;
}

std::int16_t get_i16(std::span<const std::uint8_t> b, std::size_t off)
{
  return static_cast<std::int16_t>(std::uint16_t(b[off]) | std::uint16_t(b[off + 1]) << 8);
}

float get_f32(std::span<const std::uint8_t> b, std::size_t off) { return std::bit_cast<float>(get_u32(b, off)); }

void put_u32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v)
{
  for (int k = 0; k < 4; ++k)
    b[off + k] = static_cast<std::uint8_t>(v >> (8 * k));
}

void put_i16(std::vector<std::uint8_t>& b, std::size_t off, std::int16_t v)
{
  const auto u = static_cast<std::uint16_t>(v);
  b[off] = static_cast<std::uint8_t>(u);
  b[off + 1] = static_cast<std::uint8_t>(u >> 8);
}

void put_f32(std::vector<std::uint8_t>& b, std::size_t off, float v) { put_u32(b, off, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t swap32(std::uint32_t v)
{
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

using Kind = NiftiError::Kind;

struct Geometry
{
  std::size_t cols, rows, slices, frames;
  PixelSpacing pixel;
  double thickness;
};

Geometry geometry_of(const NiftiHeader& h)
{
  Geometry g{};
  g.cols = static_cast<std::size_t>(h.dim[1]);
  g.rows = static_cast<std::size_t>(h.dim[2]);
  g.slices = static_cast<std::size_t>(h.dim[3]);
  g.frames = h.dim[0] >= 4 ? static_cast<std::size_t>(h.dim[4]) : 1;
  g.pixel = {h.pixdim[1], h.pixdim[2]};
  g.thickness = h.pixdim[3];
  return g;
}

std::size_t payload_bytes(const NiftiHeader& h) { return h.voxel_count() * static_cast<std::size_t>(h.bitpix / 8); }

std::span<const std::uint8_t> payload_of(std::span<const std::uint8_t> bytes, const NiftiHeader& h)
{
  const auto start = static_cast<std::size_t>(h.vox_offset);
  const std::size_t need = payload_bytes(h);
  if (bytes.size() < start + need)
    throw NiftiError(Kind::TruncatedPayload, bytes.size(),
                     "payload truncated: need " + std::to_string(need) + " bytes from offset " +
                         std::to_string(start) + ", file has " + std::to_string(bytes.size()));
  return bytes.subspan(start, need);
}

double voxel_value(std::span<const std::uint8_t> payload, std::size_t i, std::int16_t datatype)
{
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::Uint8: return payload[i];
    case NiftiDatatype::Int16: return get_i16(payload, 2 * i);
    case NiftiDatatype::Float32: return get_f32(payload, 4 * i);
  }
  return 0.0;
}

template <typename PlaneT, typename MakePlane>
Stack4D<PlaneT> build_stack(const Geometry& g, MakePlane&& make)
{
  std::vector<PlaneT> planes;
  planes.reserve(g.slices * g.frames);
  for (std::size_t f = 0; f < g.frames; ++f)
    for (std::size_t s = 0; s < g.slices; ++s)
      planes.push_back(make((f * g.slices + s) * g.rows * g.cols));
  return Stack4D<PlaneT>(g.slices, g.frames, std::move(planes), g.thickness, 0.0);
}

NiftiHeader header_for(std::size_t cols, std::size_t rows, std::size_t slices, std::size_t frames,
                       PixelSpacing px, double dz, double dt, NiftiDatatype type)
{
  const auto limit = static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max());
  if (cols > limit || rows > limit || slices > limit || frames > limit)
    throw NiftiError(Kind::InconsistentDims, kOffDim, "dimension exceeds NIfTI-1 limit");
  NiftiHeader h;
  h.dim = {frames > 1 ? std::int16_t{4} : std::int16_t{3},
           static_cast<std::int16_t>(cols),
           static_cast<std::int16_t>(rows),
           static_cast<std::int16_t>(slices),
           static_cast<std::int16_t>(frames),
           1,
           1,
           1};
  h.datatype = static_cast<std::int16_t>(type);
  h.bitpix = static_cast<std::int16_t>(bitpix_of(type));
  h.pixdim = {1.0f, float(px.dx), float(px.dy), float(dz), float(dt), 0.0f, 0.0f, 0.0f};
  return h;
}

template <typename PlaneT, typename Value>
std::vector<std::uint8_t> encode_stack(const Stack4D<PlaneT>& stack, NiftiDatatype type, double dt, Value&& value)
{
  const auto cols = static_cast<std::size_t>(stack.width());
  const auto rows = static_cast<std::size_t>(stack.height());
  const NiftiHeader h = header_for(cols, rows, stack.n_slices(), stack.n_frames(), stack.pixel_spacing(),
                                   stack.slice_thickness() + stack.slice_gap(), dt, type);
  std::vector<std::uint8_t> out = encode_nifti_header(h);
  out.resize(kVoxOffset + payload_bytes(h), 0);

  std::size_t i = 0;
  for (std::size_t f = 0; f < stack.n_frames(); ++f)
    for (std::size_t s = 0; s < stack.n_slices(); ++s) {
      const auto& plane = stack.at(s, f);
      for (Eigen::Index r = 0; r < plane.height(); ++r)
        for (Eigen::Index c = 0; c < plane.width(); ++c, ++i) {
          const double v = value(plane, r, c);
          const std::size_t at = kVoxOffset + i * static_cast<std::size_t>(h.bitpix / 8);
          switch (type) {
            case NiftiDatatype::Uint8: {
              const double q = std::nearbyint(v);
              if (!(q >= 0.0 && q <= 255.0))
                throw NiftiError(Kind::ValueRange, at, "value " + std::to_string(v) + " does not fit uint8");
              out[at] = static_cast<std::uint8_t>(q);
              break;
            }
            case NiftiDatatype::Int16: {
              const double q = std::nearbyint(v);
              if (!(q >= -32768.0 && q <= 32767.0))
                throw NiftiError(Kind::ValueRange, at, "value " + std::to_string(v) + " does not fit int16");
              put_i16(out, at, static_cast<std::int16_t>(q));
              break;
            }
            case NiftiDatatype::Float32: {
              if (!std::isfinite(v) || std::abs(v) > std::numeric_limits<float>::max())
                throw NiftiError(Kind::ValueRange, at, "value does not fit float32");
              put_f32(out, at, static_cast<float>(v));
              break;
            }
          }
        }
    }
  return out;
}

}  // namespace

int bitpix_of(NiftiDatatype t)
{
  switch (t) {
    case NiftiDatatype::Uint8: return 8;
    case NiftiDatatype::Int16: return 16;
    case NiftiDatatype::Float32: return 32;
  }
  return 0;
}

std::size_t NiftiHeader::voxel_count() const
{
  std::size_t n = 1;
  for (int i = 1; i <= dim[0] && i <= 7; ++i)
    n *= static_cast<std::size_t>(dim[i]);
  return n;
}

const char* to_string(NiftiError::Kind k)
{
  switch (k) {
    case Kind::Io: return "io";
    case Kind::TruncatedHeader: return "truncated_header";
    case Kind::HeaderSize: return "header_size";
    case Kind::BadMagic: return "bad_magic";
    case Kind::TwoFileFormat: return "two_file_format";
    case Kind::BigEndian: return "big_endian";
    case Kind::UnsupportedDatatype: return "unsupported_datatype";
    case Kind::InconsistentDims: return "inconsistent_dims";
    case Kind::BadSpacing: return "bad_spacing";
    case Kind::BadVoxOffset: return "bad_vox_offset";
    case Kind::TruncatedPayload: return "truncated_payload";
    case Kind::InvalidMaskCodes: return "invalid_mask_codes";
    case Kind::ValueRange: return "value_range";
  }
  return "?";
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kHeaderSize)
    throw NiftiError(Kind::TruncatedHeader, bytes.size(),
                     "file holds " + std::to_string(bytes.size()) + " bytes, header needs 348");

  NiftiHeader h;
  h.sizeof_hdr = static_cast<std::int32_t>(get_u32(bytes, 0));
  if (h.sizeof_hdr != 348) {
    if (swap32(static_cast<std::uint32_t>(h.sizeof_hdr)) == 348u)
      throw NiftiError(Kind::BigEndian, 0, "big-endian NIfTI files are not supported");
    throw NiftiError(Kind::HeaderSize, 0, "sizeof_hdr is " + std::to_string(h.sizeof_hdr) + ", expected 348");
  }

  std::memcpy(h.magic.data(), bytes.data() + kOffMagic, 4);
  if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0)
    throw NiftiError(Kind::TwoFileFormat, kOffMagic, "two-file (.hdr/.img) NIfTI is not supported");
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0)
    throw NiftiError(Kind::BadMagic, kOffMagic, "bad magic, expected \"n+1\"");

  for (std::size_t i = 0; i < 8; ++i)
    h.dim[i] = get_i16(bytes, kOffDim + 2 * i);
  if (h.dim[0] < 1 || h.dim[0] > 7)
    throw NiftiError(Kind::BigEndian, kOffDim, "dim[0] = " + std::to_string(h.dim[0]) +
                                                   " outside [1, 7]; byte order not supported");
  if (h.dim[0] != 3 && h.dim[0] != 4)
    throw NiftiError(Kind::InconsistentDims, kOffDim,
                     "only 3D and 4D volumes are supported, dim[0] = " + std::to_string(h.dim[0]));
  for (int i = 1; i <= h.dim[0]; ++i)
    if (h.dim[i] < 1)
      throw NiftiError(Kind::InconsistentDims, kOffDim + 2 * static_cast<std::size_t>(i),
                       "dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));

  h.datatype = get_i16(bytes, kOffDatatype);
  h.bitpix = get_i16(bytes, kOffBitpix);
  switch (h.datatype) {
    case 2:
    case 4:
    case 16: break;
    default:
      throw NiftiError(Kind::UnsupportedDatatype, kOffDatatype,
                       "unsupported datatype code " + std::to_string(h.datatype));
  }
  if (h.bitpix != bitpix_of(static_cast<NiftiDatatype>(h.datatype)))
    throw NiftiError(Kind::UnsupportedDatatype, kOffBitpix,
                     "bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype " +
                         std::to_string(h.datatype));

  for (std::size_t i = 0; i < 8; ++i)
    h.pixdim[i] = get_f32(bytes, kOffPixdim + 4 * i);
  for (std::size_t i = 1; i <= 3; ++i)
    if (!(h.pixdim[i] > 0.0f) || !std::isfinite(h.pixdim[i]))
      throw NiftiError(Kind::BadSpacing, kOffPixdim + 4 * i,
                       "pixdim[" + std::to_string(i) + "] must be positive");

  h.vox_offset = get_f32(bytes, kOffVoxOffset);
  if (!(h.vox_offset >= float(kHeaderSize)) || h.vox_offset != std::floor(h.vox_offset))
    throw NiftiError(Kind::BadVoxOffset, kOffVoxOffset, "invalid vox_offset");

  h.scl_slope = get_f32(bytes, kOffSclSlope);
  h.scl_inter = get_f32(bytes, kOffSclInter);
  h.qform_code = get_i16(bytes, kOffQformCode);
  h.sform_code = get_i16(bytes, kOffSformCode);
  return h;
}

std::vector<std::uint8_t> encode_nifti_header(const NiftiHeader& h)
{
  std::vector<std::uint8_t> b(kHeaderSize, 0);
  put_u32(b, 0, static_cast<std::uint32_t>(h.sizeof_hdr));
  for (std::size_t i = 0; i < 8; ++i)
    put_i16(b, kOffDim + 2 * i, h.dim[i]);
  put_i16(b, kOffDatatype, h.datatype);
  put_i16(b, kOffBitpix, h.bitpix);
  for (std::size_t i = 0; i < 8; ++i)
    put_f32(b, kOffPixdim + 4 * i, h.pixdim[i]);
  put_f32(b, kOffVoxOffset, h.vox_offset);
  put_f32(b, kOffSclSlope, h.scl_slope);
  put_f32(b, kOffSclInter, h.scl_inter);
  b[kOffXyztUnits] = 2 | 8;  // mm, s
  put_i16(b, kOffQformCode, h.qform_code);
  put_i16(b, kOffSformCode, h.sform_code);
  std::memcpy(b.data() + kOffMagic, h.magic.data(), 4);
  return b;
}

CineStack decode_nifti_image(std::span<const std::uint8_t> bytes)
{
  const NiftiHeader h = parse_nifti_header(bytes);
  const auto payload = payload_of(bytes, h);
  const Geometry g = geometry_of(h);
  const double slope = h.scl_slope == 0.0f ? 1.0 : double(h.scl_slope);
  const double inter = h.scl_slope == 0.0f ? 0.0 : double(h.scl_inter);
  const bool identity_scale = slope == 1.0 && inter == 0.0;

  return build_stack<Image>(g, [&](std::size_t base) {
    Plane<float> px(static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
    std::size_t i = base;
    for (Eigen::Index r = 0; r < px.rows(); ++r)
      for (Eigen::Index c = 0; c < px.cols(); ++c, ++i) {
        const double v = voxel_value(payload, i, h.datatype);
        px(r, c) = static_cast<float>(identity_scale ? v : v * slope + inter);
      }
    return Image(std::move(px), g.pixel);
  });
}

MaskStack decode_nifti_mask(std::span<const std::uint8_t> bytes)
{
  const NiftiHeader h = parse_nifti_header(bytes);
  if (h.datatype == static_cast<std::int16_t>(NiftiDatatype::Float32))
    throw NiftiError(Kind::UnsupportedDatatype, kOffDatatype, "label masks need an integer datatype");
  const auto payload = payload_of(bytes, h);
  const Geometry g = geometry_of(h);
  const std::size_t width = static_cast<std::size_t>(h.bitpix / 8);

  return build_stack<LabelMask>(g, [&](std::size_t base) {
    LabelMask::plane_type px(static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
    std::size_t i = base;
    for (Eigen::Index r = 0; r < px.rows(); ++r)
      for (Eigen::Index c = 0; c < px.cols(); ++c, ++i) {
        const double v = voxel_value(payload, i, h.datatype);
        if (v < 0.0 || v > kMaxLabel)
          throw NiftiError(Kind::InvalidMaskCodes, static_cast<std::size_t>(h.vox_offset) + i * width,
                           "label code " + std::to_string(static_cast<int>(v)) + " outside {0..4}");
        px(r, c) = static_cast<std::uint8_t>(v);
      }
    return LabelMask(std::move(px), g.pixel);
  });
}

std::vector<std::uint8_t> encode_nifti(const CineStack& stack, NiftiDatatype type, double dt)
{
  return encode_stack(stack, type, dt,
                      [](const Image& im, Eigen::Index r, Eigen::Index c) { return double(im(r, c)); });
}

std::vector<std::uint8_t> encode_nifti(const MaskStack& stack, NiftiDatatype type, double dt)
{
  if (type == NiftiDatatype::Float32)
    throw NiftiError(Kind::UnsupportedDatatype, kOffDatatype, "label masks need an integer datatype");
  return encode_stack(stack, type, dt,
                      [](const LabelMask& m, Eigen::Index r, Eigen::Index c) { return double(m(r, c)); });
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw NiftiError(Kind::Io, 0, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw NiftiError(Kind::Io, 0, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw NiftiError(Kind::Io, 0, "write failed for " + path);
}

CineStack read_nifti(const std::string& path)
{
  const auto bytes = read_file_bytes(path);
  return decode_nifti_image(bytes);
}

MaskStack read_nifti_mask(const std::string& path)
{
  const auto bytes = read_file_bytes(path);
  return decode_nifti_mask(bytes);
}

NiftiHeader read_nifti_header(const std::string& path)
{
  const auto bytes = read_file_bytes(path);
  return parse_nifti_header(bytes);
}

void write_nifti(const CineStack& stack, const std::string& path, NiftiDatatype type, double dt)
{
  write_file_bytes(path, encode_nifti(stack, type, dt));
}

void write_nifti(const MaskStack& stack, const std::string& path, NiftiDatatype type, double dt)
{
  write_file_bytes(path, encode_nifti(stack, type, dt));
}

}  // namespace nunet
