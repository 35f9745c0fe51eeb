#include "dyenet/image_io.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "dyenet/errors.hpp"

namespace dyenet {

namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (!tok.empty()) return tok;
    throw IoError("pnm: truncated header in '" + path + "'");
}

void pnm_header(std::istream& in, const std::string& path, const char* magic, int& w, int& h) {
    const std::string m = pnm_token(in, path);
    if (m != magic) throw IoError("pnm: '" + path + "' is not " + magic + " (got '" + m + "')");
    w = std::stoi(pnm_token(in, path));
    h = std::stoi(pnm_token(in, path));
    const int maxval = std::stoi(pnm_token(in, path));
    if (w <= 0 || h <= 0) throw IoError("pnm: bad dimensions in '" + path + "'");
    if (maxval != 255) throw IoError("pnm: '" + path + "' maxval must be 255");
    // header ends with exactly one whitespace byte, already consumed by pnm_token
}

}  // namespace

TensorF load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("ppm: cannot open '" + path + "'");
    int w = 0, h = 0;
    pnm_header(in, path, "P6", w, h);
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("ppm: truncated pixel data in '" + path + "'");
    TensorF img(Shape{3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) = static_cast<float>(raw[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0f;
    return img;
}

void save_ppm(const std::string& path, const TensorF& img) {
    require(img.shape.rank == 3 && img.shape[0] == 3, "save_ppm: image must be 3xHxW");
    const int h = img.shape[1], w = img.shape[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("ppm: cannot write '" + path + "'");
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::round(static_cast<double>(img.at3(c, y, x)) * 255.0);
                v = std::min(255.0, std::max(0.0, v));
                raw[(static_cast<size_t>(y) * w + x) * 3 + c] = static_cast<unsigned char>(v);
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("ppm: write failed for '" + path + "'");
}

InstanceMap load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pgm: cannot open '" + path + "'");
    int w = 0, h = 0;
    pnm_header(in, path, "P5", w, h);
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("pgm: truncated pixel data in '" + path + "'");
    InstanceMap m(h, w);
    for (size_t i = 0; i < raw.size(); ++i) m.id[i] = raw[i];
    return m;
}

void save_pgm(const std::string& path, const InstanceMap& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("pgm: cannot write '" + path + "'");
    out << "P5\n" << m.w << " " << m.h << "\n255\n";
    std::vector<unsigned char> raw(m.id.size());
    for (size_t i = 0; i < m.id.size(); ++i) {
        require(m.id[i] >= 0 && m.id[i] <= 255, "save_pgm: id out of byte range");
        raw[i] = static_cast<unsigned char>(m.id[i]);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("pgm: write failed for '" + path + "'");
}

}  // namespace dyenet
