#ifndef PROSODY_CHECKPOINT_HPP_
#define PROSODY_CHECKPOINT_HPP_

#include <string>

#include "json.hpp"

namespace prosody::nn {

// Versioned JSON container. A checkpoint is a set of named sections; each
// model decides what its sections hold (layer stacks, codebooks, optimizer
// state, token tables, ...).
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "prosody-checkpoint";

nlohmann::json make_checkpoint(nlohmann::json sections,
                               nlohmann::json meta = nlohmann::json::object());

void save_checkpoint(const std::string& path, const nlohmann::json& ckpt);

// Throws DataError on missing file, bad format tag, or version mismatch.
nlohmann::json load_checkpoint(const std::string& path);

}  // namespace prosody::nn

#endif  // PROSODY_CHECKPOINT_HPP_
