package android.app;

import android.os.RemoteException;

/**
 * An activity is a single, focused thing that the user can do.
 */
public class Activity {
    /**
     * Gets the current notification policy.
     */
    public boolean getNotificationPolicy() {
        INotificationManager service = getService();
        try {
            return service.getNotificationPolicy(mContext.getOpPackageName());
        } catch (RemoteException e) {
            throw e.rethrowFromSystemServer();
        }}
}
