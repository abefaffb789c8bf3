#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "morsekit/dynamics.hpp"
#include "morsekit/harness.hpp"
#include "morsekit/morse.hpp"
#include "morsekit/surrogate.hpp"

namespace morsekit {

using json = nlohmann::json;

// Grid: {"domain": {"lower": [...], "upper": [...]},
//        "leaves": [{"depth": [...], "index": [...]}, ...]} in canonical order.
json grid_to_json(const Grid& grid);
Grid grid_from_json(const json& j);

// Map: {"cells": N, "edges": [[src, dst], ...] sorted, "clipped": [...]}
json map_to_json(const MultivaluedMap& map);
MultivaluedMap map_from_json(const json& j);
std::string map_to_edge_csv(const MultivaluedMap& map);

// Morse graph: {"nodes": [{"id", "cells", "minimal"}], "order_edges": [...],
//               "retraction": {component -> node} or null}
json morse_to_json(const Condensation& cond, const MorseGraph& mg,
                   const std::optional<Retraction>& sigma);

// DOT export: nodes ranked top-down by poset height, edges are covering
// relations q -> p.
std::string morse_to_dot(const MorseGraph& mg);
std::string morse_json_to_dot(const json& j);

std::string basins_to_csv(const BasinPartition& part);

json surrogate_to_json(const GpSurrogate& gp);
GpSurrogate surrogate_from_json(const json& j);

// EnsembleRecord JSONL, one record per line.
std::string records_to_jsonl(const std::vector<EnsembleRecord>& records);
std::vector<EnsembleRecord> records_from_jsonl(std::istream& in);
std::vector<EnsembleRecord> load_records(const std::string& path);

// SamplePair CSV: 2d columns x_1..x_d, y_1..y_d, header required.
std::string pairs_to_csv(const std::vector<SamplePair>& pairs);
std::vector<SamplePair> pairs_from_csv(std::istream& in);

std::string entropy_to_csv(const std::vector<double>& entropy);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
json read_json_file(const std::string& path);

} // namespace morsekit
