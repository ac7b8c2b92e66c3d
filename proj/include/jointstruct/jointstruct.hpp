#pragma once

#include "jointstruct/edge_energy.hpp"
#include "jointstruct/errors.hpp"
#include "jointstruct/features.hpp"
#include "jointstruct/inference.hpp"
#include "jointstruct/instance.hpp"
#include "jointstruct/metrics.hpp"
#include "jointstruct/model.hpp"
#include "jointstruct/rng.hpp"
#include "jointstruct/synth.hpp"
#include "jointstruct/trainer.hpp"
#include "jointstruct/weights.hpp"
