#ifndef FCNAD_FCNAD_HPP
#define FCNAD_FCNAD_HPP

#include "fcnad/autoencoder.hpp"
#include "fcnad/bundle.hpp"
#include "fcnad/cascade.hpp"
#include "fcnad/config.hpp"
#include "fcnad/error.hpp"
#include "fcnad/eval.hpp"
#include "fcnad/fcnw.hpp"
#include "fcnad/fixture.hpp"
#include "fcnad/gaussian.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/localization.hpp"
#include "fcnad/netcore.hpp"
#include "fcnad/pipeline.hpp"
#include "fcnad/preproc.hpp"
#include "fcnad/results_io.hpp"
#include "fcnad/rfgeom.hpp"
#include "fcnad/tensor.hpp"

#endif
