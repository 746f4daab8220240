#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "f2r/core/errors.hpp"
#include "f2r/core/tensor.hpp"

namespace f2r {

// Little-endian binary stream helpers (x86 host assumed; asserted in cmake
// via byte-order check is overkill for this artifact, all targets are LE).

class BinWriter {
public:
    explicit BinWriter(const std::string& path) : os_(path, std::ios::binary) {
        if (!os_) throw IoError("cannot open for write: " + path);
    }
    template <class T>
    void pod(const T& v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void str(const std::string& s) {
        pod<uint32_t>(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void tensor_f32(const Tensor& t) {
        pod<uint32_t>(static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) pod<int32_t>(d);
        bytes(t.ptr(), t.numel() * sizeof(float));
    }
    bool good() const { return os_.good(); }

private:
    std::ofstream os_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : is_(path, std::ios::binary) {
        if (!is_) throw IoError("cannot open for read: " + path);
    }
    template <class T>
    T pod() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) throw IoError("truncated binary stream");
        return v;
    }
    void bytes(void* p, std::size_t n) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!is_) throw IoError("truncated binary stream");
    }
    std::string str() {
        uint32_t n = pod<uint32_t>();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    Tensor tensor_f32() {
        uint32_t nd = pod<uint32_t>();
        if (nd > 8) throw IoError("corrupt tensor header");
        std::vector<int> shape(nd);
        for (auto& d : shape) d = pod<int32_t>();
        Tensor t(shape);
        bytes(t.ptr(), t.numel() * sizeof(float));
        return t;
    }
    bool eof_clean() {
        is_.peek();
        return is_.eof();
    }

private:
    std::ifstream is_;
};

}  // namespace f2r
