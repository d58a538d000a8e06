#include "tacl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace tacl {

namespace {

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<uint64_t>(v)); }

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > data_.size())
            throw IoError("tensor container truncated: " + path_);
    }
    const std::string& data_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace

void save_named_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::string buf;
    put_u32(buf, kTensorContainerVersion);
    put_u32(buf, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        size_t numel = 1;
        for (size_t e : t.shape) numel *= e;
        if (numel != t.values.size())
            throw ValueError("save_named_tensors: shape/value mismatch for '" + t.name + "'");
        put_u32(buf, static_cast<uint32_t>(t.name.size()));
        buf.append(t.name);
        put_u32(buf, static_cast<uint32_t>(t.shape.size()));
        for (size_t e : t.shape) put_u64(buf, e);
        for (double v : t.values) put_f64(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::vector<NamedTensor> load_named_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(data, path);

    uint32_t version = r.u32();
    if (version != kTensorContainerVersion)
        throw IoError("unsupported tensor container version " + std::to_string(version) + " in " +
                      path);
    uint32_t count = r.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint32_t t = 0; t < count; ++t) {
        NamedTensor nt;
        nt.name = r.bytes(r.u32());
        uint32_t rank = r.u32();
        size_t numel = 1;
        nt.shape.resize(rank);
        for (uint32_t i = 0; i < rank; ++i) {
            nt.shape[i] = static_cast<size_t>(r.u64());
            numel *= nt.shape[i];
        }
        nt.values.resize(numel);
        for (size_t i = 0; i < numel; ++i) nt.values[i] = r.f64();
        tensors.push_back(std::move(nt));
    }
    if (!r.at_end()) throw IoError("trailing bytes in tensor container: " + path);
    return tensors;
}

}  // namespace tacl
