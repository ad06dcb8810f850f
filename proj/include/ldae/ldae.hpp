#pragma once

#include "ldae/analysis.hpp"
#include "ldae/checkpoint.hpp"
#include "ldae/config.hpp"
#include "ldae/core.hpp"
#include "ldae/data.hpp"
#include "ldae/gradients.hpp"
#include "ldae/network.hpp"
#include "ldae/optimizer.hpp"
#include "ldae/patches.hpp"
#include "ldae/pipeline.hpp"
#include "ldae/plots.hpp"
#include "ldae/sweep.hpp"
#include "ldae/trainer.hpp"
#include "ldae/transforms.hpp"
#include "ldae/whitening.hpp"
