#pragma once

#include "vtgrasp/classifiers.hpp"
#include "vtgrasp/controller.hpp"
#include "vtgrasp/error.hpp"
#include "vtgrasp/geometry.hpp"
#include "vtgrasp/harness/episode.hpp"
#include "vtgrasp/harness/experiments.hpp"
#include "vtgrasp/harness/scenario.hpp"
#include "vtgrasp/harness/scene.hpp"
#include "vtgrasp/harness/stream.hpp"
#include "vtgrasp/image.hpp"
#include "vtgrasp/metrics.hpp"
#include "vtgrasp/object_class.hpp"
#include "vtgrasp/pnm.hpp"
#include "vtgrasp/snapshot.hpp"
#include "vtgrasp/tactile_image.hpp"
#include "vtgrasp/text.hpp"
