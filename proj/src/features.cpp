#include "vpl/features.hpp"

#include <cmath>

#include "json.hpp"
#include "vpl/common.hpp"

namespace vpl {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'V', 'P', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::span<const float> FeatureStore::image(std::int64_t image_id) const {
    auto it = row_offset_.find(image_id);
    if (it == row_offset_.end()) {
        throw DataError("no feature rows for image_id " + std::to_string(image_id));
    }
    std::size_t begin = static_cast<std::size_t>(it->second) * dim_;
    return {data_.data() + begin, static_cast<std::size_t>(regions_) * dim_};
}

void FeatureStore::add(std::int64_t image_id, std::span<const float> values) {
    if (values.size() != static_cast<std::size_t>(regions_) * dim_) {
        throw std::invalid_argument("feature block size mismatch: expected " +
                                    std::to_string(static_cast<std::size_t>(regions_) * dim_) +
                                    ", got " + std::to_string(values.size()));
    }
    if (row_offset_.count(image_id)) {
        throw std::invalid_argument("duplicate image_id " + std::to_string(image_id));
    }
    for (float v : values) {
        if (!std::isfinite(v)) throw NumericError("non-finite feature value for image_id " +
                                                  std::to_string(image_id));
    }
    row_offset_[image_id] = data_.size() / dim_;
    data_.insert(data_.end(), values.begin(), values.end());
}

void write_features(const FeatureStore& store, const std::string& bin_path,
                    const std::string& sidecar_path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, store.regions());
    put_u32(out, store.dim());
    put_u32(out, static_cast<std::uint32_t>(store.image_count()));
    json sidecar = json::object();
    // Rows are written in ascending image_id order; offsets are re-derived so
    // the file is canonical regardless of insertion order.
    std::uint64_t next_row = 0;
    for (const auto& [image_id, offset] : store.row_offsets()) {
        for (float v : store.image(image_id)) put_f32(out, v);
        sidecar[std::to_string(image_id)] = next_row;
        next_row += store.regions();
    }
    write_file(bin_path, out);
    write_file(sidecar_path, sidecar.dump(2) + "\n");
}

FeatureStore read_features(const std::string& bin_path, const std::string& sidecar_path) {
    std::string raw = read_file(bin_path);
    std::size_t pos = 0;
    if (raw.size() < 4 || raw.compare(0, 4, kMagic, 4) != 0) {
        throw DataError("bad feature container magic in " + bin_path);
    }
    pos = 4;
    std::uint32_t version = get_u32(raw, pos);
    if (version != kVersion) {
        throw DataError("unsupported feature container version " + std::to_string(version));
    }
    std::uint32_t regions = get_u32(raw, pos);
    std::uint32_t dim = get_u32(raw, pos);
    std::uint32_t count = get_u32(raw, pos);
    if (regions == 0 || dim == 0) throw DataError("feature container has zero regions or dim");
    std::size_t expected = pos + static_cast<std::size_t>(count) * regions * dim * 4;
    if (raw.size() != expected) {
        throw DataError("feature container size mismatch: expected " + std::to_string(expected) +
                        " bytes, got " + std::to_string(raw.size()));
    }

    json sidecar;
    try {
        sidecar = json::parse(read_file(sidecar_path));
    } catch (const json::exception& e) {
        throw DataError("malformed feature sidecar " + sidecar_path + ": " + e.what());
    }

    FeatureStore store(regions, dim);
    std::vector<float> block(static_cast<std::size_t>(regions) * dim);
    // Sidecar keys are image ids; values are the image's first row index.
    std::map<std::uint64_t, std::int64_t> by_offset;
    for (auto it = sidecar.begin(); it != sidecar.end(); ++it) {
        by_offset[it.value().get<std::uint64_t>()] = std::stoll(it.key());
    }
    if (by_offset.size() != count) {
        throw DataError("feature sidecar lists " + std::to_string(by_offset.size()) +
                        " images, container holds " + std::to_string(count));
    }
    for (const auto& [row, image_id] : by_offset) {
        std::size_t at = pos + static_cast<std::size_t>(row) * dim * 4;
        if (at + block.size() * 4 > raw.size()) {
            throw DataError("feature sidecar row offset out of range for image_id " +
                            std::to_string(image_id));
        }
        for (float& v : block) v = get_f32(raw, at);
        store.add(image_id, block);
    }
    return store;
}

}  // namespace vpl
