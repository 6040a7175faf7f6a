package com.example.demo;

import android.content.res.TypedArray;
import android.os.Build;
import android.os.PowerManager;
import android.view.InputDevice;

public class DeviceTools {
    public int[] listDevicesUnguarded(InputDevice device) {
        return device.getDeviceIds();
    }

    public int[] listDevicesGuarded(InputDevice device) {
        if (Build.VERSION.SDK_INT >= 16) {
            return device.getDeviceIds();
        }
        return new int[0];
    }

    public int indexCountUnguarded(TypedArray array) {
        return array.getIndexCount();
    }

    public int indexCountGuarded(TypedArray array) {
        if (android.os.Build.VERSION.SDK_INT >= 20) {
            return array.getIndexCount();
        }
        return 0;
    }

    public boolean screenOnUnguarded(PowerManager manager) {
        return manager.isScreenOn();
    }

    public boolean screenOnGuarded(PowerManager manager) {
        if (Build.VERSION.SDK_INT < 24) {
            return manager.isScreenOn();
        }
        return false;
    }
}
