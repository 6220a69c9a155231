#include "rmt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rmt {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'T', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    os.write(buf, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    os.write(buf, 8);
}

std::uint32_t read_u32(std::istream& is) {
    char buf[4];
    is.read(buf, 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v;
    std::memcpy(&v, buf, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& header,
                     const ParamMap& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for write");
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
        for (std::size_t d : t.shape()) write_u64(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, bool requires_grad) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    const std::uint32_t header_len = read_u32(is);
    ckpt.header.resize(header_len);
    is.read(ckpt.header.data(), header_len);
    const std::uint32_t count = read_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(is);
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(read_u64(is));
            numel *= d;
        }
        std::vector<double> data(numel);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
        ckpt.params.emplace(std::move(name),
                            Tensor(std::move(shape), std::move(data), requires_grad));
    }
    return ckpt;
}

}  // namespace rmt
