#include "mitd/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'T', 'D', 'M', 'O', 'D', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::uint64_t u(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError("model file truncated");
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

const Tensor& ModelFile::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) {
            return t;
        }
    }
    throw FormatError("model file has no tensor '" + name + "'");
}

std::string encode_model_file(const ModelFile& file) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, ModelFile::kVersion);
    put_u64(out, file.metadata.size());
    out += file.metadata;
    put_u64(out, file.tensors.size());
    for (const auto& [name, t] : file.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) {
            put_u64(out, d);
        }
        for (double v : t.values()) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

ModelFile decode_model_file(const std::string& bytes) {
    Reader r(bytes);
    if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw FormatError("not a model file (bad magic)");
    }
    const auto version = r.u(4);
    if (version != ModelFile::kVersion) {
        throw FormatError("unsupported model file version " + std::to_string(version));
    }
    ModelFile file;
    file.metadata = r.str(r.u(8));
    const auto count = r.u(8);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string name = r.str(r.u(4));
        const auto rank = r.u(4);
        if (rank == 0 || rank > 8) {
            throw FormatError("tensor '" + name + "' has invalid rank");
        }
        Shape shape;
        std::uint64_t elements = 1;
        for (std::uint64_t i = 0; i < rank; ++i) {
            const auto d = r.u(8);
            // Bound every dimension by the bytes left so corrupt sizes fail before allocating.
            if (d == 0 || d > r.remaining() / 8 || elements > r.remaining() / 8 / d) {
                throw FormatError("tensor '" + name + "' has an impossible shape");
            }
            elements *= d;
            shape.push_back(d);
        }
        std::vector<double> data(shape_size(shape));
        for (auto& v : data) {
            v = std::bit_cast<double>(r.u(8));
        }
        file.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.done()) {
        throw FormatError("trailing bytes after model tensors");
    }
    return file;
}

void write_model_file(const std::filesystem::path& path, const ModelFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const auto bytes = encode_model_file(file);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("error writing " + path.string());
    }
}

ModelFile read_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read model file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_model_file(ss.str());
}

} // namespace mitd
