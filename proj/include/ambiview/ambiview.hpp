#pragma once

#include "ambiview/ambiguity.hpp"
#include "ambiview/baselines.hpp"
#include "ambiview/classify.hpp"
#include "ambiview/codebook.hpp"
#include "ambiview/commands.hpp"
#include "ambiview/io.hpp"
#include "ambiview/manifest.hpp"
#include "ambiview/parallel.hpp"
#include "ambiview/policy.hpp"
#include "ambiview/random.hpp"
#include "ambiview/so3.hpp"
#include "ambiview/synthworld.hpp"
