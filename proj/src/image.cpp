#include "afb/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "afb/errors.hpp"

namespace afb {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& header, const std::uint8_t* bytes,
          std::size_t count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(count));
    if (!out) throw DataError("write failed for " + path.string());
}

struct Header {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t offset = 0;   // first raster byte
};

class HeaderParser {
public:
    HeaderParser(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
        : bytes_(bytes), path_(path) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(path_.string() + ": " + what + " at offset " + std::to_string(pos_));
    }

    void expect_magic(const char* magic) {
        if (bytes_.size() < 2 || bytes_[0] != static_cast<std::uint8_t>(magic[0]) ||
            bytes_[1] != static_cast<std::uint8_t>(magic[1])) {
            fail(std::string("expected magic ") + magic);
        }
        pos_ = 2;
    }

    std::size_t number() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) fail("truncated header");
        if (!std::isdigit(bytes_[pos_])) fail("expected a decimal number");
        std::size_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > (1u << 24)) fail("header value too large");
            ++pos_;
        }
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing whitespace before raster");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

Header parse_header(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path, const char* magic,
                    std::size_t channels) {
    HeaderParser p(bytes, path);
    p.expect_magic(magic);
    Header h;
    h.width = p.number();
    h.height = p.number();
    const std::size_t maxval = p.number();
    if (h.width == 0 || h.height == 0) p.fail("zero image dimension");
    if (maxval != 255) p.fail("unsupported maxval " + std::to_string(maxval));
    h.offset = p.raster_start();
    const std::size_t need = h.width * h.height * channels;
    if (bytes.size() < h.offset + need) {
        throw DataError(path.string() + ": truncated raster, expected " + std::to_string(need) +
                        " bytes from offset " + std::to_string(h.offset) + ", file has " +
                        std::to_string(bytes.size()));
    }
    if (bytes.size() > h.offset + need) {
        throw DataError(path.string() + ": trailing bytes after raster at offset " +
                        std::to_string(h.offset + need));
    }
    return h;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    if (image.data.size() != image.width * image.height * 3) throw std::invalid_argument("write_ppm: bad image");
    const std::string header =
        "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    spit(path, header, image.data.data(), image.data.size());
}

RgbImage read_ppm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const Header h = parse_header(bytes, path, "P6", 3);
    RgbImage img(h.width, h.height);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), bytes.end(), img.data.begin());
    return img;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
    const std::string header =
        "P5\n" + std::to_string(labels.width()) + " " + std::to_string(labels.height()) + "\n255\n";
    spit(path, header, labels.cells().data(), labels.size());
}

LabelMap read_pgm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const Header h = parse_header(bytes, path, "P5", 1);
    LabelMap labels(h.height, h.width);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), bytes.end(), labels.cells().begin());
    return labels;
}

}  // namespace afb
