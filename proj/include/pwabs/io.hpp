#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwabs/abstract.hpp"
#include "pwabs/dynamics.hpp"
#include "pwabs/geometry.hpp"
#include "pwabs/logic.hpp"

namespace pwabs {

using Json = nlohmann::json;

Json to_json(const Vec& v);
Json to_json(const Mat& m);
Vec vec_from_json(const Json& j);
Mat mat_from_json(const Json& j);

/// {"H": [[...]], "K": [...]}
Json polytope_to_json(const Polytope& P);
Polytope polytope_from_json(const Json& j);

/// {"pieces": [...]}; the dimension is taken from `dim` when there are no pieces.
Json region_to_json(const Region& R);
Region region_from_json(const Json& j, int dim = 0);

/// {"modes":[{"A","b","region"}], "domain", "noise_sigma"}
Json model_to_json(const PwaModel& M);
PwaModel model_from_json(const Json& j);

/// [{"name","h","k"}]
Json atoms_to_json(std::span<const Atom> atoms);
std::vector<Atom> atoms_from_json(const Json& j);

/// {"states":[{"region","obs"}], "transitions":[[i,j]]}
Json ts_to_json(const FiniteTS& ts);
FiniteTS ts_from_json(const Json& j);

/// CSV with header x1..xN,y1..yN and, when labels are given, a trailing
/// "mode" column (-1 for discarded points).
std::string dataset_to_csv(const Dataset& d, const std::vector<int>* labels = nullptr);
Dataset dataset_from_csv(const std::string& text);

/// One polytope per row: state,piece,mode,letter,H,K with H rows separated
/// by ';' and entries by spaces.
std::string partition_csv(const FiniteTS& ts);

std::string read_text_file(const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace pwabs
