#pragma once

#include "occkit/core.hpp"
#include "occkit/edge_prior.hpp"
#include "occkit/errors.hpp"
#include "occkit/grad_check.hpp"
#include "occkit/io.hpp"
#include "occkit/losses.hpp"
#include "occkit/math.hpp"
#include "occkit/panoptic_head.hpp"
#include "occkit/parallel.hpp"
#include "occkit/ray_metrics.hpp"
#include "occkit/rng.hpp"
#include "occkit/scene_synth.hpp"
#include "occkit/view_transform.hpp"
