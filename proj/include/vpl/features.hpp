#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vpl {

// Region features for a set of images: every image contributes `regions` rows
// of `dim` floats. Backing store is flat; the sidecar maps image_id to the
// image's first row.
class FeatureStore {
public:
    FeatureStore() = default;
    FeatureStore(std::uint32_t regions, std::uint32_t dim) : regions_(regions), dim_(dim) {}

    std::uint32_t regions() const { return regions_; }
    std::uint32_t dim() const { return dim_; }
    std::size_t image_count() const { return row_offset_.size(); }

    bool has(std::int64_t image_id) const { return row_offset_.count(image_id) != 0; }

    // regions*dim floats, row-major. Throws DataError when the image is missing.
    std::span<const float> image(std::int64_t image_id) const;

    // `values` must hold regions*dim finite floats.
    void add(std::int64_t image_id, std::span<const float> values);

    const std::map<std::int64_t, std::uint64_t>& row_offsets() const { return row_offset_; }

private:
    std::uint32_t regions_{};
    std::uint32_t dim_{};
    std::vector<float> data_;
    std::map<std::int64_t, std::uint64_t> row_offset_;
};

// Binary container (magic "VPLF") plus a json sidecar of row offsets.
void write_features(const FeatureStore& store, const std::string& bin_path,
                    const std::string& sidecar_path);
FeatureStore read_features(const std::string& bin_path, const std::string& sidecar_path);

}  // namespace vpl
