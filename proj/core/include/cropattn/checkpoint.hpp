#ifndef CROPATTN_CHECKPOINT_HPP
#define CROPATTN_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "cropattn/model.hpp"

namespace cropattn {

/// Everything needed to run the trained model on new data.
struct Checkpoint {
  ParameterSet params;
  std::vector<std::string> class_vocabulary;
};

/// JSON with explicit shapes per matrix; doubles round-trip exactly, so
/// save -> load -> save is byte-identical.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace cropattn

#endif // CROPATTN_CHECKPOINT_HPP
