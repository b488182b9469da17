#pragma once

#include "vrpower/error.hpp"
#include "vrpower/trace.hpp"
#include "vrpower/dataset.hpp"
#include "vrpower/solver.hpp"
#include "vrpower/model_io.hpp"
#include "vrpower/evaluation.hpp"
#include "vrpower/synth.hpp"
#include "vrpower/ingest.hpp"
#include "vrpower/report.hpp"
