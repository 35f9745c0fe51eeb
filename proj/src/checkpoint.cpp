#include "dyenet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "dyenet/errors.hpp"

namespace dyenet {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError("dyck: truncated file '" + path + "'");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("dyck: cannot write '" + path + "'");
    out.write("DYCK", 4);
    put_u32(out, static_cast<uint32_t>(store.params.size()));
    // std::map iterates in sorted key order, which is the required table order
    for (const auto& kv : store.params) {
        put_u32(out, static_cast<uint32_t>(kv.first.size()));
        out.write(kv.first.data(), static_cast<std::streamsize>(kv.first.size()));
        const Shape& s = kv.second->shape;
        put_u32(out, static_cast<uint32_t>(s.rank));
        for (int i = 0; i < s.rank; ++i) put_u32(out, static_cast<uint32_t>(s[i]));
    }
    for (const auto& kv : store.params) {
        std::vector<unsigned char> raw(kv.second->data.size() * 4);
        for (size_t i = 0; i < kv.second->data.size(); ++i) {
            uint32_t u;
            std::memcpy(&u, &kv.second->data[i], 4);
            raw[i * 4 + 0] = static_cast<unsigned char>(u & 0xff);
            raw[i * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
            raw[i * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
            raw[i * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
    if (!out) throw IoError("dyck: write failed for '" + path + "'");
}

ParamStore<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("dyck: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "DYCK", 4) != 0)
        throw IoError("dyck: bad magic in '" + path + "'");
    const uint32_t count = get_u32(in, path);
    ParamStore<float> store;
    std::vector<std::string> order;
    std::string prev;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t len = get_u32(in, path);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (static_cast<uint32_t>(in.gcount()) != len)
            throw IoError("dyck: truncated key table in '" + path + "'");
        if (i > 0 && !(prev < name)) throw IoError("dyck: key table not sorted in '" + path + "'");
        prev = name;
        const uint32_t rank = get_u32(in, path);
        if (rank == 0 || rank > 4) throw IoError("dyck: bad rank in '" + path + "'");
        Shape s;
        s.rank = static_cast<int>(rank);
        for (uint32_t r = 0; r < rank; ++r) {
            const uint32_t e = get_u32(in, path);
            if (e == 0 || e > 1u << 24) throw IoError("dyck: bad extent in '" + path + "'");
            s.d[r] = static_cast<int>(e);
        }
        store.params[name] = make_tensor<float>(s);
        order.push_back(name);
    }
    for (const std::string& name : order) {
        auto& t = store.params[name];
        std::vector<unsigned char> raw(t->data.size() * 4);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size())
            throw IoError("dyck: truncated blob for '" + name + "' in '" + path + "'");
        for (size_t i = 0; i < t->data.size(); ++i) {
            uint32_t u = static_cast<uint32_t>(raw[i * 4 + 0]) |
                         (static_cast<uint32_t>(raw[i * 4 + 1]) << 8) |
                         (static_cast<uint32_t>(raw[i * 4 + 2]) << 16) |
                         (static_cast<uint32_t>(raw[i * 4 + 3]) << 24);
            std::memcpy(&t->data[i], &u, 4);
        }
    }
    return store;
}

}  // namespace dyenet
