#include "bugforge/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "bugforge/errors.hpp"
#include "bugforge/jsonl.hpp"

namespace bugforge {

namespace {

Json tensors_to_json(const std::vector<TensorRef>& refs) {
  Json out = Json::object();
  for (const TensorRef& ref : refs) {
    Json t;
    t["rows"] = ref.rows;
    t["cols"] = ref.cols;
    t["data"] = std::vector<double>(ref.data, ref.data + ref.size);
    out[ref.name] = std::move(t);
  }
  return out;
}

void tensors_from_json(const Json& j, const std::vector<TensorRef>& refs) {
  for (const TensorRef& ref : refs) {
    if (!j.contains(ref.name)) throw ParseError("checkpoint: missing tensor \"" + ref.name + "\"");
    const Json& t = j[ref.name];
    if (t.value("rows", -1) != ref.rows || t.value("cols", -1) != ref.cols) {
      throw ParseError("checkpoint: tensor \"" + ref.name + "\" has unexpected shape");
    }
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<long long>(data.size()) != ref.size) {
      throw ParseError("checkpoint: tensor \"" + ref.name + "\" has unexpected element count");
    }
    std::copy(data.begin(), data.end(), ref.data);
  }
}

Json rng_states_to_json(const RngSuite& rngs) {
  Json out = Json::object();
  for (const auto& [name, text] : rngs.save()) out[name] = text;
  return out;
}

// Mutants generated by the last step before the save still await training;
// without them a mid-epoch resume would drift from the uninterrupted run.
Json carried_to_json(const std::vector<PendingMutant>& carried) {
  Json out = Json::array();
  for (const PendingMutant& p : carried) {
    out.push_back(Json{{"source_id", p.source_id},
                       {"ids", p.enc.ids},
                       {"spans", p.enc.spans},
                       {"first_sub", p.first_sub},
                       {"mask", p.mask},
                       {"gold", p.gold}});
  }
  return out;
}

std::vector<PendingMutant> carried_from_json(const Json& j) {
  std::vector<PendingMutant> carried;
  for (const Json& e : j) {
    PendingMutant p;
    p.source_id = e.at("source_id").get<std::string>();
    p.enc.ids = e.at("ids").get<std::vector<int>>();
    p.enc.spans = e.at("spans").get<std::vector<std::pair<int, int>>>();
    p.first_sub = e.at("first_sub").get<std::vector<int>>();
    p.mask = e.at("mask").get<std::vector<int>>();
    p.gold = e.at("gold").get<int>();
    carried.push_back(std::move(p));
  }
  return carried;
}

}  // namespace

Json checkpoint_to_json(const Checkpoint& ckpt) {
  // tensor_refs wants mutable access; serialization only reads through it.
  auto& state = const_cast<TrainState&>(ckpt.state);
  Json j;
  j["format"] = "bugforge-checkpoint";
  j["version"] = 1;
  j["config"] = train_config_to_json(state.cfg);
  j["subtokens"] = subtoken_model_to_json(ckpt.subtok);
  if (ckpt.call_vocab) j["call_vocab"] = call_vocabulary_to_json(*ckpt.call_vocab);
  j["step"] = state.step;
  j["lambda"] = state.lambda;
  j["ema_mlm"] = state.ema_mlm;
  j["ema_d"] = state.ema_d;
  j["ema_mlm_ready"] = state.ema_mlm_ready;
  j["ema_d_ready"] = state.ema_d_ready;
  j["rng_root"] = state.rngs.root();
  j["rng_states"] = rng_states_to_json(state.rngs);
  if (!state.carried.empty()) j["carried"] = carried_to_json(state.carried);
  j["detector"] = tensors_to_json(tensor_refs(state.detector));
  j["detector_adam"] = Json{{"t", state.det_adam.t},
                            {"m", tensors_to_json(tensor_refs(state.det_adam.m))},
                            {"v", tensors_to_json(tensor_refs(state.det_adam.v))}};
  if (state.mutator) {
    j["mutator"] = tensors_to_json(tensor_refs(*state.mutator));
    j["mutator_adam"] = Json{{"t", state.mut_adam->t},
                             {"m", tensors_to_json(tensor_refs(state.mut_adam->m))},
                             {"v", tensors_to_json(tensor_refs(state.mut_adam->v))}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  if (j.value("format", "") != "bugforge-checkpoint") {
    throw ParseError("not a checkpoint file (missing format marker)");
  }
  Checkpoint ckpt;
  ckpt.subtok = subtoken_model_from_json(j.at("subtokens"));
  if (j.contains("call_vocab")) {
    ckpt.call_vocab = call_vocabulary_from_json(j["call_vocab"]);
  }
  const TrainConfig cfg = train_config_from_json(j.at("config"));
  ckpt.state = make_train_state(cfg, ckpt.subtok);
  TrainState& state = ckpt.state;
  state.step = j.value("step", 0LL);
  state.lambda = j.value("lambda", 1.0);
  state.ema_mlm = j.value("ema_mlm", 0.0);
  state.ema_d = j.value("ema_d", 0.0);
  state.ema_mlm_ready = j.value("ema_mlm_ready", false);
  state.ema_d_ready = j.value("ema_d_ready", false);
  if (j.contains("rng_states")) {
    std::map<std::string, std::string> states;
    for (const auto& [name, text] : j["rng_states"].items()) {
      states[name] = text.get<std::string>();
    }
    state.rngs.load(j.value("rng_root", state.rngs.root()), states);
  }
  if (j.contains("carried")) state.carried = carried_from_json(j["carried"]);
  tensors_from_json(j.at("detector"), tensor_refs(state.detector));
  if (j.contains("detector_adam")) {
    const Json& a = j["detector_adam"];
    state.det_adam.t = a.value("t", 0LL);
    tensors_from_json(a.at("m"), tensor_refs(state.det_adam.m));
    tensors_from_json(a.at("v"), tensor_refs(state.det_adam.v));
  }
  if (j.contains("mutator")) {
    if (!state.mutator) {
      throw ParseError("checkpoint has mutator tensors but config mode is not contextual");
    }
    tensors_from_json(j["mutator"], tensor_refs(*state.mutator));
    if (j.contains("mutator_adam")) {
      const Json& a = j["mutator_adam"];
      state.mut_adam->t = a.value("t", 0LL);
      tensors_from_json(a.at("m"), tensor_refs(state.mut_adam->m));
      tensors_from_json(a.at("v"), tensor_refs(state.mut_adam->v));
    }
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_json_file(path, checkpoint_to_json(ckpt), /*indent=*/-1);
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_json_file(path));
}

LoadedModel load_model(const std::string& path, const std::string& name) {
  Checkpoint ckpt = load_checkpoint(path);
  LoadedModel model;
  model.name = name.empty() ? path : name;
  model.detector = std::move(ckpt.state.detector);
  model.subtok = std::move(ckpt.subtok);
  model.bug_type = ckpt.state.cfg.bug_type;
  model.call_vocab = std::move(ckpt.call_vocab);
  return model;
}

}  // namespace bugforge
