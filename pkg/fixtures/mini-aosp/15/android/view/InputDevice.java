package android.view;

import android.os.RemoteException;

/**
 * Describes the capabilities of a particular input device.
 */
public final class InputDevice {
    /**
     * Gets the ids of all input devices in the system.
     * @return The input device ids.
     */
    public static int[] getDeviceIds() {
        IWindowManager wm = Display.getWindowManager();
        try {
            return wm.getInputDeviceIds();
        } catch (RemoteException ex) {
            throw new RuntimeException("Could not get input device ids from Window Manager.", ex);
        }
    }

    /**
     * Gets information about the input device with the specified id.
     */
    public static InputDevice getDevice(int id) {
        return InputManager.getInstance().getInputDevice(id);
    }
}
