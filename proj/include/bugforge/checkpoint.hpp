#pragma once

#include <optional>
#include <string>

#include "bugforge/annotator.hpp"
#include "bugforge/bpe.hpp"
#include "bugforge/trainer.hpp"

namespace bugforge {

// Everything needed to resume training bit-for-bit or to run inference:
// config, subtoken model, call vocabulary (apimisuse only), all parameter
// tensors, optimizer moments, RNG stream states, and loss-balancing state.
struct Checkpoint {
  TrainState state;
  SubtokenModel subtok;
  std::optional<CallVocabulary> call_vocab;
};

Json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const Json& j);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Inference-side view: a detector with its preprocessing artifacts.
struct LoadedModel {
  std::string name;
  DetectorModel detector;
  SubtokenModel subtok;
  BugType bug_type = BugType::bor_weak;
  std::optional<CallVocabulary> call_vocab;
};

LoadedModel load_model(const std::string& path, const std::string& name = "");

}  // namespace bugforge
