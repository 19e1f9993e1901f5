#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "iibr/light_field.hpp"
#include "iibr/occlusion.hpp"
#include "iibr/transformer.hpp"

#include <json.hpp>

namespace iibr::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// 8-bit RGB (gray and alpha inputs are expanded / dropped); c = value / 255.
RgbImage read_png(const fs::path& path);
/// Stores round(255 c) per channel after clamping to [0,1].
void write_png(const fs::path& path, const RgbImage& img);

/// 8-bit gray; nonzero = set. Written as 0 / 255.
Mask read_mask_png(const fs::path& path);
void write_mask_png(const fs::path& path, const Mask& m);

/// 16-bit gray, value / 65535 (relative depth maps).
ScalarField read_png16(const fs::path& path);
void write_png16(const fs::path& path, const ScalarField& f);

/// Grayscale PFM ("Pf"). Written little-endian (scale -1), rows bottom-up.
ScalarField read_pfm(const fs::path& path);
void write_pfm(const fs::path& path, const ScalarField& f);

inline constexpr int lf_manifest_version = 1;
std::string view_filename(int v, int u);
/// Writes view_{v:02}_{u:02}.png for every view plus lf.json.
void save_lf(const fs::path& dir, const LightField4D& lf);
LightField4D load_lf(const fs::path& dir);

struct Checkpoint {
    RayTransformerParams params;
    std::uint64_t seed = 0;
    std::int64_t iteration = 0;
};
/// "IIBR1", config, seed, iteration, then named float32 arrays with 64-bit shapes; little-endian.
void save_checkpoint(const fs::path& path, const Checkpoint& c);
std::string encode_checkpoint(const Checkpoint& c);
/// When `expected` is given, any config field that differs is reported by name.
Checkpoint load_checkpoint(const fs::path& path, const AttentionConfig* expected = nullptr);
Checkpoint decode_checkpoint(const std::string& bytes, const AttentionConfig* expected = nullptr);

json read_json(const fs::path& path);
/// Writes with two-space indentation and a trailing newline.
void write_json(const fs::path& path, const json& j);
void write_text(const fs::path& path, const std::string& text);
/// Throws FormatError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

/// Runs `command <dir>` after writing in.png and mask.png to a fresh temporary
/// directory (under $IIBR_TMPDIR when set) and reads back out.png. Unmasked
/// pixels of the result are restored from `img`; a drift above 1/255 there is
/// reported through `warning`.
RgbImage external_inpaint_sidecar(const RgbImage& img, const Mask& mask, const std::string& command,
                                  std::string* warning = nullptr);

class ExternalInpainter : public Inpainter {
public:
    explicit ExternalInpainter(std::string command) : command_(std::move(command)) {}
    RgbImage fill(const RgbImage& img, const OcclusionMask& mask) const override;

private:
    std::string command_;
};

/// "naive" or "external" (needs a command).
std::unique_ptr<Inpainter> make_inpainter(const std::string& name, const std::string& command = "");

} // namespace iibr::io
