#include "f2r/core/serialize.hpp"
#include "f2r/model/backbone.hpp"

namespace f2r {

namespace {
constexpr uint32_t kModelMagic = 0x4632524d;  // "F2RM"
constexpr uint32_t kModelVersion = 1;
}  // namespace

void write_model(BinWriter& w, const ModelState& st) {
    w.pod(kModelMagic);
    w.pod(kModelVersion);
    w.pod<uint8_t>(st.mode == Mode::blind ? 0 : 1);
    w.pod<uint8_t>(st.skip == SkipKind::faam ? 0 : (st.skip == SkipKind::fdam ? 1 : 2));
    const auto& a = st.arch;
    w.pod<int32_t>(a.levels);
    w.pod<int32_t>(a.base_ch);
    w.pod<int32_t>(a.cap_mult);
    w.pod<int32_t>(a.data_ch);
    w.pod<int32_t>(a.input_ch);
    w.pod<int32_t>(a.window);
    w.pod<int32_t>(a.faam_ratio);
    w.pod<int32_t>(a.faam_spatial_k);
    w.pod<int32_t>(a.dcn_k);
    w.pod<int32_t>(a.dcn_groups);
    w.pod<double>(a.offset_clamp);
    w.pod<double>(a.lrelu_slope);
    w.pod<uint8_t>(a.stacked_input ? 1 : 0);
    w.pod<uint32_t>(static_cast<uint32_t>(st.params.size()));
    for (const auto& [n, t] : st.params) {
        w.str(n);
        w.tensor_f32(t);
    }
    w.pod<uint64_t>(st.params_checksum());
}

ModelState read_model(BinReader& r, const std::string& path) {
    if (r.pod<uint32_t>() != kModelMagic) throw IoError("not a model file: " + path);
    if (r.pod<uint32_t>() != kModelVersion) throw IoError("unsupported model version in " + path);
    ModelState st;
    st.mode = r.pod<uint8_t>() == 0 ? Mode::blind : Mode::nonblind;
    const uint8_t sk = r.pod<uint8_t>();
    st.skip = sk == 0 ? SkipKind::faam : (sk == 1 ? SkipKind::fdam : SkipKind::direct);
    auto& a = st.arch;
    a.levels = r.pod<int32_t>();
    a.base_ch = r.pod<int32_t>();
    a.cap_mult = r.pod<int32_t>();
    a.data_ch = r.pod<int32_t>();
    a.input_ch = r.pod<int32_t>();
    a.window = r.pod<int32_t>();
    a.faam_ratio = r.pod<int32_t>();
    a.faam_spatial_k = r.pod<int32_t>();
    a.dcn_k = r.pod<int32_t>();
    a.dcn_groups = r.pod<int32_t>();
    a.offset_clamp = r.pod<double>();
    a.lrelu_slope = r.pod<double>();
    a.stacked_input = r.pod<uint8_t>() != 0;
    const uint32_t n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        st.params.emplace_back(std::move(name), r.tensor_f32());
    }
    const uint64_t want = r.pod<uint64_t>();
    if (st.params_checksum() != want) throw IoError("model checksum mismatch in " + path);
    return st;
}

void save_model(const ModelState& st, const std::string& path) {
    BinWriter w(path);
    write_model(w, st);
    if (!w.good()) throw IoError("failed writing model to " + path);
}

ModelState load_model(const std::string& path) {
    BinReader r(path);
    return read_model(r, path);
}

}  // namespace f2r
