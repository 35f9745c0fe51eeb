#include "dyenet/flow_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "dyenet/errors.hpp"

namespace dyenet {

namespace {

uint32_t read_u32le(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError("dyfl: truncated header in '" + path + "'");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u32le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

float f32_from_le(const unsigned char* b) {
    uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                 (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

void f32_to_le(float f, unsigned char* b) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    b[0] = static_cast<unsigned char>(u & 0xff);
    b[1] = static_cast<unsigned char>((u >> 8) & 0xff);
    b[2] = static_cast<unsigned char>((u >> 16) & 0xff);
    b[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

}  // namespace

TensorF load_dyfl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("dyfl: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "DYFL", 4) != 0)
        throw IoError("dyfl: bad magic in '" + path + "'");
    const uint32_t h = read_u32le(in, path);
    const uint32_t w = read_u32le(in, path);
    if (h == 0 || w == 0 || h > 1u << 20 || w > 1u << 20)
        throw IoError("dyfl: implausible dimensions in '" + path + "'");
    const size_t n = static_cast<size_t>(h) * w * 2;
    std::vector<unsigned char> raw(n * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("dyfl: truncated flow data in '" + path + "'");
    TensorF flow(Shape{2, static_cast<int>(h), static_cast<int>(w)});
    for (size_t p = 0; p < static_cast<size_t>(h) * w; ++p) {
        flow.data[p] = f32_from_le(raw.data() + p * 8);                           // dx
        flow.data[static_cast<size_t>(h) * w + p] = f32_from_le(raw.data() + p * 8 + 4);  // dy
    }
    return flow;
}

void save_dyfl(const std::string& path, const TensorF& flow) {
    require(flow.shape.rank == 3 && flow.shape[0] == 2, "save_dyfl: flow must be 2xHxW");
    const int h = flow.shape[1], w = flow.shape[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("dyfl: cannot write '" + path + "'");
    out.write("DYFL", 4);
    write_u32le(out, static_cast<uint32_t>(h));
    write_u32le(out, static_cast<uint32_t>(w));
    std::vector<unsigned char> raw(static_cast<size_t>(h) * w * 8);
    for (size_t p = 0; p < static_cast<size_t>(h) * w; ++p) {
        f32_to_le(flow.data[p], raw.data() + p * 8);
        f32_to_le(flow.data[static_cast<size_t>(h) * w + p], raw.data() + p * 8 + 4);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("dyfl: write failed for '" + path + "'");
}

}  // namespace dyenet
