#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "opal/controller.hpp"

namespace opal {

// Key-value text format, one "key = value" per line, '#' starts a comment.
// Unknown keys and malformed values throw ConfigInvalid. Keys:
//   n K T L Z S A data_block stash_limit seed instance_id min_candidates
//   retention.n_target retention.w retention.c dreaming (true|false)
//   pad.traverse pad.embed pad.synthesize pad.summarize checkpoint_pad
//   ivf.dim ivf.m ivf.nbits ivf.warmup ivf.split_factor ivf.merge_factor
//   ivf.margin ivf.neighbor_clusters ivf.kmeans_iters ivf.seed
//   store (oram|plaintext|inmemory) mode (kg|ann) backend (memory|file) dir
// retention.K always follows K.
void apply_config_entry(ControllerConfig& cfg, std::string_view key, std::string_view value);
ControllerConfig parse_config(std::string_view text, ControllerConfig base = {});
ControllerConfig load_config_file(const std::filesystem::path& path, ControllerConfig base = {});
// Round-trips through parse_config.
std::string format_config(const ControllerConfig& cfg);
void validate_config(const ControllerConfig& cfg);

}  // namespace opal
