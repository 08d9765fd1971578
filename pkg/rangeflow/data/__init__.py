from rangeflow.data.registration import registry, register, make, spec
